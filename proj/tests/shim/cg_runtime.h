/* Minimal host runtime used by the tests to execute emitted programs. PEs
   run one after another inside cg_spawn. */
#ifndef CG_RUNTIME_H_
#define CG_RUNTIME_H_

#ifdef __cplusplus
extern "C" {
#endif

void cg_dma_get(void* ldm, const void* mem, unsigned long block, unsigned long stride, unsigned long count);
void cg_dma_put(void* mem, const void* ldm, unsigned long block, unsigned long stride, unsigned long count);
void cg_spawn(void (*kernel)(void*), void* para);
int cg_pe_id(void);
int cg_num_pes(void);
void cg_sync(void);

#ifdef __cplusplus
}
#endif

#endif
