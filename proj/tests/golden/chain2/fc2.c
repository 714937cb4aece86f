/* Generated by swsched. Do not edit. */
#include "cg_runtime.h"
#include "fc2.h"
#include "fc2_para.h"

void fc2_run(void) {
  static struct fc2_para para;
  para.fc2_off = 138280;
  para.fc1_off = 132608;
  para.fc2_w_off = 133120;
  para.fc2_b_off = 138240;
  para.fc2_pe_extent = 10;
  para.fc2_pe_chunk = 1;
  cg_spawn(fc2_slave, &para);
  cg_sync();
}
