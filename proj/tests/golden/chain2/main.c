/* Generated by swsched. Do not edit. */
/* Network chain2. Usage: model params.bin input.bin output.bin */

#include <stdint.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "cg_runtime.h"
#include "fc1.h"
#include "fc2.h"

#define ARENA_BYTES 138320ULL

unsigned char* cg_arena;

struct tensor_slot {
  const char* name;
  uint64_t offset;
  uint64_t bytes;
};

static const struct tensor_slot initialized[] = {
  {"x", 0, 1024},
  {"fc1_w", 1024, 131072},
  {"fc1_b", 132096, 512},
  {"fc2_w", 133120, 5120},
  {"fc2_b", 138240, 40},
  {NULL, 0, 0},
};

static const struct tensor_slot outputs[] = {
  {"fc2", 138280, 40},
  {NULL, 0, 0},
};

static uint64_t read_le(const unsigned char* b, int n) {
  uint64_t v = 0;
  for (int i = n - 1; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

static void write_le(FILE* f, uint64_t v, int n) {
  for (int i = 0; i < n; ++i) fputc((int)((v >> (8 * i)) & 0xff), f);
}

/* Copies the records of a CGW1 blob into their arena slots. Records naming
   no slot are skipped; a missing file leaves its tensors zero. */
static int load_blob(const char* path) {
  FILE* f = fopen(path, "rb");
  if (!f) {
    fprintf(stderr, "%s: not found, tensors stay zero\n", path);
    return 0;
  }
  unsigned char head[8];
  int status = 0;
  if (fread(head, 1, 4, f) != 4 || memcmp(head, "CGW1", 4) != 0) {
    fprintf(stderr, "%s: not a CGW1 blob\n", path);
    fclose(f);
    return 1;
  }
  for (;;) {
    const size_t got = fread(head, 1, 4, f);
    if (got == 0) break;
    const uint64_t len = read_le(head, 4);
    char* name = (char*)malloc(len + 1);
    if (got != 4 || !name || fread(name, 1, len, f) != len || fread(head, 1, 8, f) != 8) {
      fprintf(stderr, "%s: truncated record\n", path);
      free(name);
      status = 1;
      break;
    }
    name[len] = '\0';
    const uint64_t bytes = read_le(head, 8);
    const struct tensor_slot* slot = NULL;
    for (const struct tensor_slot* s = initialized; s->name; ++s)
      if (strcmp(s->name, name) == 0) slot = s;
    if (!slot) {
      fseek(f, (long)bytes, SEEK_CUR);
    } else if (slot->bytes != bytes || fread(cg_arena + slot->offset, 1, bytes, f) != bytes) {
      fprintf(stderr, "%s: record %s has the wrong size\n", path, name);
      status = 1;
    }
    free(name);
    if (status != 0) break;
  }
  fclose(f);
  return status;
}

static int dump_outputs(const char* path) {
  FILE* f = fopen(path, "wb");
  if (!f) {
    fprintf(stderr, "%s: cannot write\n", path);
    return 1;
  }
  fwrite("CGW1", 1, 4, f);
  for (const struct tensor_slot* s = outputs; s->name; ++s) {
    const uint64_t len = strlen(s->name);
    write_le(f, len, 4);
    fwrite(s->name, 1, len, f);
    write_le(f, s->bytes, 8);
    fwrite(cg_arena + s->offset, 1, s->bytes, f);
  }
  return fclose(f) == 0 ? 0 : 1;
}

int main(int argc, char** argv) {
  if (argc != 4) {
    fprintf(stderr, "usage: %s params.bin input.bin output.bin\n", argv[0]);
    return 2;
  }
  int status = 0;

  /* Stage 1: arena allocation. */
  cg_arena = (unsigned char*)calloc(ARENA_BYTES > 0 ? ARENA_BYTES : 1, 1);
  if (!cg_arena) {
    fprintf(stderr, "cannot allocate %llu arena bytes\n", ARENA_BYTES);
    return 1;
  }

  /* Stage 2: parameter and input initialization. */
  if (load_blob(argv[1]) != 0 || load_blob(argv[2]) != 0) status = 1;

  /* Stage 3: computation in topological order. */
  if (status == 0) {
    fc1_run();
    fc2_run();
  }

  /* Stage 4: output dump. */
  if (status == 0) status = dump_outputs(argv[3]);

  free(cg_arena);
  return status;
}
