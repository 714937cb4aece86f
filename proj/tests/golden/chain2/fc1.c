/* Generated by swsched. Do not edit. */
#include "cg_runtime.h"
#include "fc1.h"
#include "fc1_para.h"

void fc1_run(void) {
  static struct fc1_para para;
  para.fc1_off = 132608;
  para.x_off = 0;
  para.fc1_w_off = 1024;
  para.fc1_b_off = 132096;
  para.fc1_pe_extent = 128;
  para.fc1_pe_chunk = 2;
  cg_spawn(fc1_slave, &para);
  cg_sync();
}
