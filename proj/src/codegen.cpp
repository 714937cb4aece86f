#include "swsched/codegen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "swsched/dma_inserter.hpp"
#include "swsched/error.hpp"

namespace swsched {

namespace {

// Integer expression in C, kept as a linear combination of opaque atoms so
// that static parts fold to constants. Atoms are self-delimiting C text.
class Lin {
 public:
  Lin(int64_t c = 0) : c_(c) {}  // NOLINT: constants convert implicitly
  static Lin atom(std::string text) {
    Lin l;
    l.terms_.emplace_back(std::move(text), 1);
    return l;
  }

  bool is_const() const { return terms_.empty(); }
  int64_t value() const { return c_; }

  Lin& operator+=(const Lin& o) {
    for (const auto& [a, k] : o.terms_) add_term(a, k);
    c_ += o.c_;
    return *this;
  }
  friend Lin operator+(Lin a, const Lin& b) { return a += b; }
  friend Lin operator-(Lin a, const Lin& b) { return a += b.scaled(-1); }

  Lin scaled(int64_t k) const {
    Lin r(c_ * k);
    if (k != 0)
      for (const auto& [a, m] : terms_) r.terms_.emplace_back(a, m * k);
    return r;
  }

  std::string str() const {
    std::string out;
    for (const auto& [a, k] : terms_) {
      const int64_t mag = k < 0 ? -k : k;
      const std::string t = mag == 1 ? a : fmt::format("{}*{}", mag, a);
      if (out.empty()) {
        out = k < 0 ? "-" + t : t;
      } else {
        out += (k < 0 ? " - " : " + ") + t;
      }
    }
    if (out.empty()) return fmt::format("{}", c_);
    if (c_ > 0) out += fmt::format(" + {}", c_);
    if (c_ < 0) out += fmt::format(" - {}", -c_);
    return out;
  }

  /// Text usable as an operand of * or /.
  std::string operand() const {
    if (is_const()) return c_ < 0 ? fmt::format("({})", c_) : str();
    if (c_ == 0 && terms_.size() == 1 && terms_[0].second == 1) return terms_[0].first;
    return "(" + str() + ")";
  }

 private:
  void add_term(const std::string& a, int64_t k) {
    auto it = std::find_if(terms_.begin(), terms_.end(), [&](const auto& t) { return t.first == a; });
    if (it == terms_.end()) {
      if (k != 0) terms_.emplace_back(a, k);
      return;
    }
    it->second += k;
    if (it->second == 0) terms_.erase(it);
  }

  std::vector<std::pair<std::string, int64_t>> terms_;
  int64_t c_ = 0;
};

Lin mul(const Lin& a, const Lin& b) {
  if (a.is_const()) return b.scaled(a.value());
  if (b.is_const()) return a.scaled(b.value());
  return Lin::atom(a.operand() + "*" + b.operand());
}

Lin div_floor(const Lin& a, int64_t k) {
  if (a.is_const()) return Lin(a.value() / k);
  return Lin::atom(fmt::format("({} / {})", a.operand(), k));
}

Lin mod(const Lin& a, int64_t k) {
  if (a.is_const()) return Lin(a.value() % k);
  return Lin::atom(fmt::format("({} % {})", a.operand(), k));
}

Lin ceil_div(const Lin& a, int64_t k) {
  if (a.is_const()) return Lin((a.value() + k - 1) / k);
  return Lin::atom(fmt::format("(({}) / {})", (a + Lin(k - 1)).str(), k));
}

Lin min_of(const Lin& a, const Lin& b) {
  if (a.is_const() && b.is_const()) return Lin(std::min(a.value(), b.value()));
  return Lin::atom(fmt::format("SW_MIN({}, {})", a.str(), b.str()));
}

Lin product(const std::vector<Lin>& xs, size_t begin, size_t end) {
  Lin p(1);
  for (size_t i = begin; i < end; ++i) p = mul(p, xs[i]);
  return p;
}

std::string c_type(ElemKind e) { return e == ElemKind::f32 ? "float" : "int32_t"; }

std::string c_constant(double value, ElemKind e) {
  if (e == ElemKind::f32) {
    if (std::isinf(value)) return value < 0 ? "(-INFINITY)" : "INFINITY";
    std::string s = fmt::format("{}", static_cast<float>(value));
    if (s.find_first_of(".e") == std::string::npos) s += ".0";
    return s + "f";
  }
  const int32_t v = init_value<int32_t>(value);
  if (v == std::numeric_limits<int32_t>::lowest()) return "INT32_MIN";
  if (v == std::numeric_limits<int32_t>::max()) return "INT32_MAX";
  return fmt::format("{}", v);
}

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string sanitize(std::string_view name) {
  std::string s(name);
  for (auto& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
  return s;
}

const char* kBanner = "/* Generated by swsched. Do not edit. */\n";

// One operator's kernel function.
class KernelWriter {
 public:
  KernelWriter(const SubOp& op, const std::string& record)
      : s_(op.sched), nest_(op.sched.nest), op_(op.name), record_(record) {
    const auto& accesses = nest_.accesses();
    elem_ = accesses[0].tensor.elem;
    ctype_ = c_type(elem_);
    scope_.assign(nest_.vars().size(), 0);
    if (const auto pv = nest_.parallel_var())
      for (const auto& r : nest_.relations())
        if (const auto* sp = std::get_if<SplitRel>(&r); sp && sp->outer == *pv) pe_split_ = *sp;
    std::set<std::string> used;
    for (const auto& v : nest_.vars()) {
      std::string n = "i_" + sanitize(v.name);
      while (!used.insert(n).second) n += "_";
      var_names_.push_back(n);
    }
    for (size_t a = 0; a < accesses.size(); ++a) {
      const std::string& t = accesses[a].tensor.name;
      const auto same = std::count_if(accesses.begin(), accesses.end(),
                                      [&](const TensorAccess& x) { return x.tensor.name == t; });
      ldm_names_.push_back(same > 1 ? fmt::format("ldm_{}_{}", t, a) : "ldm_" + t);
      tile_elems_.push_back(0);
    }
    for (const auto& d : s_.dma)
      if (tile_elems_[d.access] == 0) tile_elems_[d.access] = d.tile_elems();
    levels_.resize(s_.num_outer + 1);
    for (const auto& d : s_.dma) (d.direction == DmaDirection::get ? levels_[d.level].gets : levels_[d.level].puts).push_back(&d);
  }

  std::string emit() {
    const auto& accesses = nest_.accesses();
    line(0, fmt::format("void {}_slave(void* para) {{", op_));
    line(1, fmt::format("const struct {0}* p = (const struct {0}*)para;", record_));
    line(1, "const int pe = cg_pe_id();");
    std::set<std::string> declared;
    for (const auto& acc : accesses)
      if (declared.insert(acc.tensor.name).second)
        line(1, fmt::format("{0}* const mem_{1} = ({0}*)(cg_arena + p->{1}_off);", ctype_, acc.tensor.name));
    for (size_t a = 0; a < accesses.size(); ++a)
      if (tile_elems_[a] > 0) line(1, fmt::format("static CG_LDM {} {}[{}];", ctype_, ldm_names_[a], tile_elems_[a]));
    if (pe_split_) {
      const std::string e = fmt::format("p->{}_pe_extent", op_), c = fmt::format("p->{}_pe_chunk", op_);
      line(1, fmt::format("const int64_t {}_begin = pe * {};", op_, c));
      line(1, fmt::format("const int64_t {0}_end = {0}_begin + {1} < {2} ? {0}_begin + {1} : {2};", op_, c, e));
      line(1, fmt::format("if ({0}_begin >= {0}_end) return;", op_));
    } else {
      line(1, "if (pe != 0) return;");
    }
    emit_level(0, 1);
    line(0, "}");
    return out_;
  }

 private:
  struct Level {
    std::vector<const DmaDescriptor*> gets, puts;
  };

  void line(int indent, const std::string& text) {
    out_.append(static_cast<size_t>(indent) * 2, ' ');
    out_ += text;
    out_ += '\n';
  }

  Lin value(VarId v) const {
    if (pe_split_ && v == pe_split_->parent) return Lin::atom(op_ + "_begin") + value(pe_split_->inner);
    if (const auto* sp = nest_.split_of(v)) return value(sp->outer).scaled(sp->factor) + value(sp->inner);
    if (const auto* f = nest_.fuse_of(v)) {
      const Lin fused = value(f->fused);
      const int64_t ext = nest_.var(f->inner).extent;
      return v == f->outer ? div_floor(fused, ext) : mod(fused, ext);
    }
    if (pe_split_ && v == pe_split_->outer) return Lin::atom("pe");
    return scope_[v.value] ? Lin::atom(var_names_[v.value]) : Lin(0);
  }

  Lin cap(VarId v) const {
    const IterVar& iv = nest_.var(v);
    if (cap_is_static(nest_, v) || iv.origin == VarOrigin::root || iv.origin == VarOrigin::fused)
      return Lin(iv.extent);
    const SplitRel* sp = nest_.split_producing(v);
    if (iv.origin == VarOrigin::split_outer) return ceil_div(cap(sp->parent), sp->factor);
    if (pe_split_ && sp->outer == pe_split_->outer) return Lin::atom(op_ + "_end") - Lin::atom(op_ + "_begin");
    return min_of(Lin(sp->factor), cap(sp->parent) - value(sp->outer).scaled(sp->factor));
  }

  Lin index(const AffineIndex& idx) const {
    Lin l(idx.constant);
    for (const auto& t : idx.terms) {
      // The PE loop enters indices as pe * chunk, which is the PE's begin.
      if (pe_split_ && t.var == pe_split_->outer && t.coeff % pe_split_->factor == 0) {
        l += Lin::atom(op_ + "_begin").scaled(t.coeff / pe_split_->factor);
      } else {
        l += value(t.var).scaled(t.coeff);
      }
    }
    return l;
  }

  // Runtime span of each tensor dimension covered by a descriptor's tile.
  std::vector<Lin> spans(const DmaDescriptor& d) const {
    std::vector<Lin> out;
    for (const auto& idx : nest_.accesses()[d.access].indices) {
      Lin s(1);
      for (const auto& t : idx.terms)
        if (std::find(d.tile_vars.begin(), d.tile_vars.end(), t.var) != d.tile_vars.end())
          s += (cap(t.var) - Lin(1)).scaled(t.coeff);
      out.push_back(s);
    }
    return out;
  }

  void emit_transfer(const DmaDescriptor& d, int indent) {
    const auto& acc = nest_.accesses()[d.access];
    const TensorDecl& t = acc.tensor;
    const int rank = t.rank();
    const auto sp = spans(d);
    Lin base;
    for (int dim = 0; dim < rank; ++dim) base += index(acc.indices[dim]).scaled(t.pitch(dim));
    const int merged = d.merged_dims;
    const Lin block = product(sp, 0, static_cast<size_t>(merged));
    const Lin count = merged < rank ? sp[merged] : Lin(1);
    const Lin stride = merged < rank ? Lin(t.pitch(merged)) : block;
    const bool get = d.direction == DmaDirection::get;
    line(indent, fmt::format("/* {} {}{} */", get ? "get" : "put", t.name, d.accumulate ? " (accumulate)" : ""));
    // Planes, highest dimension outermost; the scratchpad side stays packed.
    Lin ldm_off, mem_off = base;
    int depth = indent;
    for (int dim = rank - 1; dim > merged; --dim) {
      const std::string q = fmt::format("q{}", dim);
      if (sp[dim].is_const() && sp[dim].value() == 1) continue;
      line(depth, fmt::format("for (int64_t {0} = 0; {0} < {1}; ++{0})", q, sp[dim].str()));
      ++depth;
      ldm_off += mul(Lin::atom(q), product(sp, 0, static_cast<size_t>(dim)));
      mem_off += Lin::atom(q).scaled(t.pitch(dim));
    }
    const std::string ldm = ldm_off.is_const() && ldm_off.value() == 0 ? ldm_names_[d.access]
                                                                      : ldm_names_[d.access] + " + " + ldm_off.str();
    const std::string mem = mem_off.is_const() && mem_off.value() == 0 ? "mem_" + t.name
                                                                      : "mem_" + t.name + " + " + mem_off.str();
    const std::string sz = fmt::format("sizeof({})", ctype_);
    const std::string args = fmt::format("{}*{}, {}*{}, {}", block.operand(), sz, stride.operand(), sz, count.str());
    if (get) {
      line(depth, fmt::format("cg_dma_get({}, {}, {});", ldm, mem, args));
    } else {
      line(depth, fmt::format("cg_dma_put({}, {}, {});", mem, ldm, args));
    }
  }

  void emit_level(int level, int indent) {
    for (const auto* d : levels_[level].gets) emit_transfer(*d, indent);
    if (level == s_.num_outer) {
      emit_inner(indent);
    } else {
      const VarId v = nest_.order()[level];
      const std::string& n = var_names_[v.value];
      line(indent, fmt::format("for (int64_t {0} = 0; {0} < {1}; ++{0}) {{", n, cap(v).str()));
      scope_[v.value] = 1;
      emit_level(level + 1, indent + 1);
      scope_[v.value] = 0;
      line(indent, "}");
    }
    for (const auto* d : levels_[level].puts) emit_transfer(*d, indent);
  }

  // Element offset of an access inside the compute body.
  Lin body_offset(int a, const std::vector<std::vector<Lin>>& pitches) const {
    const auto& acc = nest_.accesses()[a];
    Lin off;
    if (tile_elems_[a] == 0) {
      for (int dim = 0; dim < acc.tensor.rank(); ++dim) off += index(acc.indices[dim]).scaled(acc.tensor.pitch(dim));
      return off;
    }
    for (int dim = 0; dim < acc.tensor.rank(); ++dim)
      for (const auto& t : acc.indices[dim].terms)
        if (std::find(inner_.begin(), inner_.end(), t.var) != inner_.end())
          off += mul(pitches[a][dim], Lin::atom(var_names_[t.var.value]).scaled(t.coeff));
    return off;
  }

  std::string ref(int a, const std::vector<std::vector<Lin>>& pitches) const {
    const bool tiled = tile_elems_[a] > 0;
    return fmt::format("{}[{}]", tiled ? ldm_names_[a] : "mem_" + nest_.accesses()[a].tensor.name,
                       body_offset(a, pitches).str());
  }

  std::string expr(const Expr& e, const std::vector<std::vector<Lin>>& pitches) const {
    switch (e.op) {
      case Expr::Op::load: return ref(nest_.input_access(e.input), pitches);
      case Expr::Op::constant: return c_constant(e.value, elem_);
      case Expr::Op::add: return fmt::format("({} + {})", expr(e.args[0], pitches), expr(e.args[1], pitches));
      case Expr::Op::mul: return fmt::format("({} * {})", expr(e.args[0], pitches), expr(e.args[1], pitches));
      case Expr::Op::max: {
        const auto a = expr(e.args[0], pitches), b = expr(e.args[1], pitches);
        return fmt::format("({0} < {1} ? {1} : {0})", a, b);
      }
      case Expr::Op::select:
        return fmt::format("({} > 0 ? {} : {})", expr(e.args[0], pitches), expr(e.args[1], pitches),
                           expr(e.args[2], pitches));
    }
    return "0";
  }

  void emit_inner(int indent) {
    const auto& accesses = nest_.accesses();
    const auto& def = nest_.def();
    const auto order = nest_.order();
    inner_.assign(order.begin() + s_.num_outer, order.end());
    // Caps and tile pitches are taken with every inner loop at zero.
    std::vector<Lin> caps;
    for (VarId v : inner_) caps.push_back(cap(v));
    std::vector<std::vector<Lin>> pitches(accesses.size());
    line(indent, "{");
    ++indent;
    for (size_t a = 0; a < accesses.size(); ++a) {
      if (tile_elems_[a] == 0) continue;
      const DmaDescriptor* d = nullptr;
      for (const auto& x : s_.dma)
        if (x.access == static_cast<int>(a)) d = &x;
      const auto sp = spans(*d);
      for (int dim = 0; dim < accesses[a].tensor.rank(); ++dim) {
        Lin p = product(sp, 0, static_cast<size_t>(dim));
        if (!p.is_const()) {
          const std::string n = fmt::format("{}_p{}", ldm_names_[a], dim);
          line(indent, fmt::format("const int64_t {} = {};", n, p.str()));
          p = Lin::atom(n);
        }
        pitches[a].push_back(p);
      }
    }
    for (size_t j = 0; j < inner_.size(); ++j) {
      const std::string& n = var_names_[inner_[j].value];
      line(indent + static_cast<int>(j), fmt::format("for (int64_t {0} = 0; {0} < {1}; ++{0})", n, caps[j].str()));
      scope_[inner_[j].value] = 1;
    }
    const int body = indent + static_cast<int>(inner_.size());
    line(body, "{");
    const int in = body + 1;
    Lin red;
    int64_t red_max = 0;
    for (size_t v = 0; v < def.vars.size(); ++v)
      if (def.vars[v].kind == VarKind::reduction) {
        red += value(VarId{static_cast<int>(v)});
        red_max += def.vars[v].extent - 1;
      }
    const std::string out = ref(LoopNest::output_access, pitches);
    line(in, fmt::format("const {} v = {};", ctype_, expr(def.expr, pitches)));
    std::string last;  // condition of an element's last visit
    if (def.reduce != ReduceKind::none) {
      line(in, fmt::format("const int64_t red = {};", red.str()));
      line(in, fmt::format("{} cur = red == 0 ? {} : {};", ctype_, c_constant(def.init, elem_), out));
      if (def.reduce == ReduceKind::sum) {
        line(in, "cur = cur + v;");
      } else {
        line(in, "if (cur < v) cur = v;");
      }
      last = fmt::format("red == {}", red_max);
    } else {
      line(in, fmt::format("{} cur = v;", ctype_));
    }
    if (def.epilogue != Epilogue::none) {
      int e = in;
      if (!last.empty()) {
        line(in, fmt::format("if ({}) {{", last));
        ++e;
      }
      if (def.bias) line(e, fmt::format("cur = cur + {};", ref(*nest_.bias_access(), pitches)));
      if (has_relu(def.epilogue)) line(e, "if (cur < 0) cur = 0;");
      if (!last.empty()) line(in, "}");
    }
    line(in, fmt::format("{} = cur;", out));
    line(body, "}");
    for (VarId v : inner_) scope_[v.value] = 0;
    --indent;
    line(indent, "}");
  }

  const ScheduledNest& s_;
  const LoopNest& nest_;
  std::string op_, record_;
  ElemKind elem_ = ElemKind::f32;
  std::string ctype_;
  std::vector<char> scope_;
  std::optional<SplitRel> pe_split_;
  std::vector<std::string> var_names_, ldm_names_;
  std::vector<int64_t> tile_elems_;
  std::vector<Level> levels_;
  std::vector<VarId> inner_;
  std::string out_;
};

std::string describe(const SubOp& op) {
  const auto& s = op.sched;
  std::vector<std::string> outer, buffer;
  for (VarId v : s.outer()) outer.push_back(s.nest.var(v).name);
  for (const auto& pv : s.plan_vars) buffer.push_back(fmt::format("{}={}", pv.name, s.plan.at(pv.id)));
  std::string part = s.partition ? fmt::format("{} over {} PEs, chunk {}", s.partition->var,
                                               s.partition->active_pes(), s.partition->chunk)
                                 : "single PE";
  return fmt::format("/* {}: outer [{}], buffer [{}], {}; {} tile bytes, {} DMA executions. */\n", op.name,
                     fmt::join(outer, ", "), fmt::join(buffer, ", "), part, s.tile_bytes, s.predicted_dma_execs);
}

std::string c_string(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

const char* kSlotType = R"(struct tensor_slot {
  const char* name;
  uint64_t offset;
  uint64_t bytes;
};

)";

const char* kMainSupport = R"(static uint64_t read_le(const unsigned char* b, int n) {
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
)";

}  // namespace

std::string layer_entry(const LayerPlan& layer) { return layer.name + "_run"; }

LayerSources emit_layer(const LayerPlan& layer) {
  const std::string record = layer.name + "_para";
  const std::string guard = upper(layer.name);
  LayerSources src;

  src.header = fmt::format("{0}#ifndef {1}_H_\n#define {1}_H_\n\n/* Runs layer {2} ({3}) on the core group. */\nvoid {4}(void);\n\n#endif\n",
                           kBanner, guard, layer.name, to_string(layer.kind), layer_entry(layer));

  std::string rec = fmt::format("{0}#ifndef {1}_PARA_H_\n#define {1}_PARA_H_\n\n#include <stdint.h>\n\n", kBanner, guard);
  rec += "extern unsigned char* cg_arena;\n\n";
  rec += "/* Byte offsets into the arena, then per partitioned operator its loop extent and chunk. */\n";
  rec += fmt::format("struct {} {{\n", record);
  for (const auto& f : layer.record) rec += fmt::format("  int64_t {};\n", f.name);
  rec += "};\n\n";
  for (const auto& op : layer.ops) rec += fmt::format("void {}_slave(void* para);\n", op.name);
  rec += "\n#endif\n";
  src.record = std::move(rec);

  std::string w = fmt::format("{}#include \"cg_runtime.h\"\n#include \"{}.h\"\n#include \"{}.h\"\n\n", kBanner,
                              layer.name, record);
  w += fmt::format("void {}(void) {{\n", layer_entry(layer));
  w += fmt::format("  static struct {} para;\n", record);
  for (const auto& f : layer.record) {
    const bool ws = std::any_of(layer.temps.begin(), layer.temps.end(),
                                [&](const std::string& t) { return f.name == t + "_off"; });
    w += fmt::format("  para.{} = {};{}\n", f.name, f.value, ws ? "  /* workspace */" : "");
  }
  for (const auto& op : layer.ops) w += fmt::format("  cg_spawn({}_slave, &para);\n  cg_sync();\n", op.name);
  w += "}\n";
  src.wrapper = std::move(w);

  std::string k = kBanner;
  k += fmt::format("#include <math.h>\n#include <stdint.h>\n\n#include \"cg_runtime.h\"\n#include \"{}.h\"\n\n", record);
  k += "#ifndef CG_LDM\n#define CG_LDM _Thread_local\n#endif\n";
  k += "#define SW_MIN(a, b) ((a) < (b) ? (a) : (b))\n";
  for (const auto& op : layer.ops) {
    k += "\n" + describe(op);
    k += KernelWriter(op, record).emit();
  }
  src.kernel = std::move(k);
  return src;
}

SourceTree emit_program(const ProgramPlan& program) {
  SourceTree tree;
  auto add = [&](const std::string& path, std::string text) {
    if (!tree.files.emplace(path, std::move(text)).second)
      throw IrError(fmt::format("emitted file '{}' would be written twice", path));
    tree.manifest.push_back(path);
  };
  const auto& mem = program.memory;
  std::string m = kBanner;
  m += fmt::format("/* Network {}. Usage: model params.bin input.bin output.bin */\n\n", program.graph.name);
  m += "#include <stdint.h>\n#include <stdio.h>\n#include <stdlib.h>\n#include <string.h>\n\n#include \"cg_runtime.h\"\n";
  for (const auto& l : program.layers) m += fmt::format("#include \"{}.h\"\n", l.name);
  m += fmt::format("\n#define ARENA_BYTES {}ULL\n\nunsigned char* cg_arena;\n\n", mem.arena_bytes);
  std::string init = "static const struct tensor_slot initialized[] = {\n";
  for (const auto& a : mem.persistent)
    if (a.role == TensorRole::input || a.role == TensorRole::param)
      init += fmt::format("  {{{}, {}, {}}},\n", c_string(a.tensor.name), a.offset, a.bytes);
  init += "  {NULL, 0, 0},\n};\n\n";
  std::string outs = "static const struct tensor_slot outputs[] = {\n";
  for (const auto& o : program.outputs) {
    const auto& a = mem.at(o);
    outs += fmt::format("  {{{}, {}, {}}},\n", c_string(o), a.offset, a.bytes);
  }
  outs += "  {NULL, 0, 0},\n};\n\n";
  m += kSlotType + init + outs + kMainSupport;
  m += R"(
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
)";
  for (const auto& l : program.layers) m += fmt::format("    {}();\n", layer_entry(l));
  m += R"(  }

  /* Stage 4: output dump. */
  if (status == 0) status = dump_outputs(argv[3]);

  free(cg_arena);
  return status;
}
)";
  add("main.c", std::move(m));
  for (const auto& l : program.layers) {
    auto src = emit_layer(l);
    add(l.name + ".h", std::move(src.header));
    add(l.name + ".c", std::move(src.wrapper));
    add(l.name + ".slave.c", std::move(src.kernel));
    add(l.name + "_para.h", std::move(src.record));
  }
  return tree;
}

void SourceTree::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& [path, text] : files) {
    std::ofstream out(dir / path, std::ios::binary);
    out << text;
    if (!out) throw Error(fmt::format("cannot write '{}'", (dir / path).string()));
  }
}

}  // namespace swsched
