/* Generated by swsched. Do not edit. */
#include <math.h>
#include <stdint.h>

#include "cg_runtime.h"
#include "fc1_para.h"

#ifndef CG_LDM
#define CG_LDM _Thread_local
#endif
#define SW_MIN(a, b) ((a) < (b) ? (a) : (b))

/* fc1: outer [], buffer [o.l=2, i=256], o over 64 PEs, chunk 2; 3088 tile bytes, 256 DMA executions. */
void fc1_slave(void* para) {
  const struct fc1_para* p = (const struct fc1_para*)para;
  const int pe = cg_pe_id();
  float* const mem_fc1 = (float*)(cg_arena + p->fc1_off);
  float* const mem_x = (float*)(cg_arena + p->x_off);
  float* const mem_fc1_w = (float*)(cg_arena + p->fc1_w_off);
  float* const mem_fc1_b = (float*)(cg_arena + p->fc1_b_off);
  static CG_LDM float ldm_fc1[2];
  static CG_LDM float ldm_x[256];
  static CG_LDM float ldm_fc1_w[512];
  static CG_LDM float ldm_fc1_b[2];
  const int64_t fc1_begin = pe * p->fc1_pe_chunk;
  const int64_t fc1_end = fc1_begin + p->fc1_pe_chunk < p->fc1_pe_extent ? fc1_begin + p->fc1_pe_chunk : p->fc1_pe_extent;
  if (fc1_begin >= fc1_end) return;
  /* get x */
  cg_dma_get(ldm_x, mem_x, 256*sizeof(float), 256*sizeof(float), 1);
  /* get fc1_w */
  cg_dma_get(ldm_fc1_w, mem_fc1_w + 256*fc1_begin, 512*sizeof(float), 512*sizeof(float), 1);
  /* get fc1_b */
  cg_dma_get(ldm_fc1_b, mem_fc1_b + fc1_begin, 2*sizeof(float), 2*sizeof(float), 1);
  {
    for (int64_t i_o_l = 0; i_o_l < 2; ++i_o_l)
      for (int64_t i_i = 0; i_i < 256; ++i_i)
        {
          const float v = (ldm_x[i_i] * ldm_fc1_w[i_i + 256*i_o_l]);
          const int64_t red = i_i;
          float cur = red == 0 ? 0.0f : ldm_fc1[i_o_l];
          cur = cur + v;
          if (red == 255) {
            cur = cur + ldm_fc1_b[i_o_l];
            if (cur < 0) cur = 0;
          }
          ldm_fc1[i_o_l] = cur;
        }
  }
  /* put fc1 */
  cg_dma_put(mem_fc1 + fc1_begin, ldm_fc1, 2*sizeof(float), 2*sizeof(float), 1);
}
