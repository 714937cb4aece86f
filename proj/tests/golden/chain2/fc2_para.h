/* Generated by swsched. Do not edit. */
#ifndef FC2_PARA_H_
#define FC2_PARA_H_

#include <stdint.h>

extern unsigned char* cg_arena;

/* Byte offsets into the arena, then per partitioned operator its loop extent and chunk. */
struct fc2_para {
  int64_t fc2_off;
  int64_t fc1_off;
  int64_t fc2_w_off;
  int64_t fc2_b_off;
  int64_t fc2_pe_extent;
  int64_t fc2_pe_chunk;
};

void fc2_slave(void* para);

#endif
