#pragma once

// C source emission for a lowered program.
//
// The tree targets a small runtime API (cg_runtime.h, C linkage):
//   void cg_dma_get(void* ldm, const void* mem, unsigned long block,
//                   unsigned long stride, unsigned long count);
//   void cg_dma_put(void* mem, const void* ldm, unsigned long block,
//                   unsigned long stride, unsigned long count);
//   void cg_spawn(void (*kernel)(void*), void* para);
//   int cg_pe_id(void);
//   int cg_num_pes(void);
//   void cg_sync(void);
// A DMA moves `count` rows of `block` bytes whose starts lie `stride` bytes
// apart in memory; the scratchpad side is packed. cg_spawn starts the kernel
// on every PE and cg_sync waits until all of them return.
//
// Layout: main.c, and per layer <layer>.h (host entry point), <layer>.c
// (fills the parameter record and launches the kernels), <layer>.slave.c
// (one kernel per operator) and <layer>_para.h (the record).

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "swsched/graph.hpp"

namespace swsched {

struct SourceTree {
  std::map<std::string, std::string> files;  // relative path -> text
  std::vector<std::string> manifest;         // main.c, then four files per layer in order

  /// Writes every file below `dir`, creating it when needed.
  void write(const std::filesystem::path& dir) const;
};

struct LayerSources {
  std::string header;   // <layer>.h
  std::string wrapper;  // <layer>.c
  std::string kernel;   // <layer>.slave.c
  std::string record;   // <layer>_para.h
};

LayerSources emit_layer(const LayerPlan& layer);
SourceTree emit_program(const ProgramPlan& program);

/// Entry point of a layer in the emitted code.
std::string layer_entry(const LayerPlan& layer);

}  // namespace swsched
