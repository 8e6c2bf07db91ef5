#include "mfg/scenario_io.hpp"

#include <fstream>
#include <sstream>

#include "mfg/dynamics.hpp"
#include "mfg/errors.hpp"
#include "toml.hpp"

namespace mfg::io {

namespace {

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void bad(const toml::node* node, const std::string& field, const std::string& what) const {
    std::ostringstream os;
    os << source_;
    if (node) {
      const auto& where = node->source().begin;
      os << ':' << where.line << ':' << where.column;
    }
    os << ": " << field << ": " << what;
    fail(ErrorCode::ConfigParseError, os.str());
  }

  const toml::table& table(const toml::table& parent, const std::string& key, const std::string& field) const {
    const toml::node* node = parent.get(key);
    if (!node) bad(&parent, field, "missing section");
    const auto* t = node->as_table();
    if (!t) bad(node, field, "expected a table");
    return *t;
  }

  const toml::table* optional_table(const toml::table& parent, const std::string& key,
                                    const std::string& field) const {
    const toml::node* node = parent.get(key);
    if (!node) return nullptr;
    const auto* t = node->as_table();
    if (!t) bad(node, field, "expected a table");
    return t;
  }

  std::string string(const toml::table& t, const std::string& key, const std::string& field,
                     std::optional<std::string> fallback = std::nullopt) const {
    const toml::node* node = t.get(key);
    if (!node) {
      if (fallback) return *fallback;
      bad(&t, field, "missing required string");
    }
    const auto v = node->value<std::string>();
    if (!v) bad(node, field, "expected a string");
    return *v;
  }

  double number(const toml::table& t, const std::string& key, const std::string& field,
                std::optional<double> fallback = std::nullopt) const {
    const toml::node* node = t.get(key);
    if (!node) {
      if (fallback) return *fallback;
      bad(&t, field, "missing required number");
    }
    const auto v = node->value<double>();
    if (!v || !node->is_number()) bad(node, field, "expected a number");
    return *v;
  }

  std::size_t count(const toml::table& t, const std::string& key, const std::string& field,
                    std::optional<std::size_t> fallback = std::nullopt) const {
    const toml::node* node = t.get(key);
    if (!node) {
      if (fallback) return *fallback;
      bad(&t, field, "missing required integer");
    }
    const auto v = node->value<std::int64_t>();
    if (!v || !node->is_integer() || *v < 0) bad(node, field, "expected a nonnegative integer");
    return static_cast<std::size_t>(*v);
  }

  std::vector<std::string> strings(const toml::node* node, const std::string& field) const {
    const auto* arr = node ? node->as_array() : nullptr;
    if (!arr) bad(node, field, "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& item : *arr) {
      const auto v = item.value<std::string>();
      if (!v) bad(&item, field, "expected a string");
      out.push_back(*v);
    }
    return out;
  }

  struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;
    const toml::node* node = nullptr;

    std::size_t rank() const { return shape.size(); }
  };

  Tensor tensor(const toml::node* node, const std::string& field) const {
    if (!node) bad(nullptr, field, "missing");
    Tensor t;
    t.node = node;
    fill(*node, field, 0, t);
    return t;
  }

  std::vector<double> vector(const toml::node* node, const std::string& field) const {
    const Tensor t = tensor(node, field);
    if (t.rank() != 1) bad(node, field, "expected a flat array of numbers");
    return t.data;
  }

 private:
  void fill(const toml::node& node, const std::string& field, std::size_t depth, Tensor& t) const {
    if (const auto* arr = node.as_array()) {
      if (depth == t.shape.size()) {
        t.shape.push_back(arr->size());
      } else if (t.shape[depth] != arr->size()) {
        bad(&node, field, "ragged array: expected " + std::to_string(t.shape[depth]) + " entries, found " +
                              std::to_string(arr->size()));
      }
      if (arr->empty()) bad(&node, field, "empty array");
      for (const auto& item : *arr) fill(item, field, depth + 1, t);
      return;
    }
    if (!node.is_number()) bad(&node, field, "expected a number");
    if (depth != t.shape.size() && !t.data.empty()) bad(&node, field, "ragged array nesting");
    t.data.push_back(*node.value<double>());
  }

  std::string source_;
};

using Tensor = Reader::Tensor;

// Accepts [x]... without a type axis for single-type scenarios.
std::size_t with_type_axis(const Reader& rd, const Tensor& t, std::size_t base_rank, std::size_t types,
                           const std::string& field) {
  if (t.rank() == base_rank + 1) {
    if (t.shape[0] != types) {
      rd.bad(t.node, field, "type axis has " + std::to_string(t.shape[0]) + " entries, scenario has " +
                                std::to_string(types) + " types");
    }
    return 1;
  }
  if (t.rank() == base_rank && types == 1) return 0;
  rd.bad(t.node, field, "expected rank " + std::to_string(base_rank) + (types == 1 ? " (or " : " plus a type axis (") +
                            std::to_string(base_rank + 1) + " with a type axis)");
}

void expect_shape(const Reader& rd, const Tensor& t, std::size_t offset,
                  const std::vector<std::size_t>& dims, const std::string& field) {
  for (std::size_t i = 0; i < dims.size(); ++i)
    if (t.shape[offset + i] != dims[i]) {
      rd.bad(t.node, field, "axis " + std::to_string(offset + i) + " has " + std::to_string(t.shape[offset + i]) +
                                " entries, expected " + std::to_string(dims[i]));
    }
}

std::size_t flat_index(const Tensor& t, std::size_t offset, std::size_t type,
                       std::initializer_list<std::size_t> idx) {
  std::size_t pos = offset ? type : 0;
  std::size_t axis = offset;
  for (std::size_t i : idx) pos = pos * t.shape[axis++] + i;
  return pos;
}

StateSpace read_space(const Reader& rd, const toml::table& root) {
  const auto& sec = rd.table(root, "space", "space");
  StateSpace space;
  space.states = rd.strings(sec.get("states"), "space.states");
  if (const auto* node = sec.get("types")) space.types = rd.strings(node, "space.types");
  const std::size_t S = space.states.size();
  if (const auto* by_state = rd.optional_table(sec, "actions_by_state", "space.actions_by_state")) {
    std::vector<std::vector<std::string>> per_state(S);
    for (std::size_t x = 0; x < S; ++x) {
      const auto* node = by_state->get(space.states[x]);
      if (!node) rd.bad(by_state, "space.actions_by_state", "no actions for state '" + space.states[x] + "'");
      per_state[x] = rd.strings(node, "space.actions_by_state." + space.states[x]);
    }
    space.actions.assign(space.types.size(), per_state);
  } else {
    const auto labels = sec.get("actions") ? rd.strings(sec.get("actions"), "space.actions")
                                           : std::vector<std::string>{"stay"};
    space.actions.assign(space.types.size(), std::vector<std::vector<std::string>>(S, labels));
  }
  return space;
}

Horizon read_horizon(const Reader& rd, const toml::table& root) {
  const auto& sec = rd.table(root, "horizon", "horizon");
  Horizon h;
  const std::string mode = rd.string(sec, "mode", "horizon.mode");
  if (mode == "discrete") {
    h.mode = KernelMode::DiscreteProbability;
    h.stages = rd.count(sec, "stages", "horizon.stages");
  } else if (mode == "continuous") {
    h.mode = KernelMode::ContinuousRate;
    h.T = rd.number(sec, "T", "horizon.T");
    h.dt = rd.number(sec, "dt", "horizon.dt", 1e-3);
  } else {
    rd.bad(sec.get("mode"), "horizon.mode", "expected 'discrete' or 'continuous', got '" + mode + "'");
  }
  return h;
}

Population read_m0(const Reader& rd, const toml::table& root, const StateSpace& space) {
  const auto& sec = rd.table(root, "m0", "m0");
  Population m0(space.type_count(), space.state_count());
  auto load_row = [&](const toml::node* node, std::size_t k, const std::string& field) {
    const auto row = rd.vector(node, field);
    if (row.size() != space.state_count()) {
      rd.bad(node, field, "expected " + std::to_string(space.state_count()) + " masses, found " +
                              std::to_string(row.size()));
    }
    std::copy(row.begin(), row.end(), m0.row(k).begin());
  };
  if (const auto* node = sec.get("values")) {
    if (space.type_count() != 1) rd.bad(node, "m0.values", "multi-type scenarios list m0 per type label");
    load_row(node, 0, "m0.values");
  } else {
    for (std::size_t k = 0; k < space.type_count(); ++k) {
      const auto* node = sec.get(space.types[k]);
      if (!node) rd.bad(&sec, "m0", "no distribution for type '" + space.types[k] + "'");
      load_row(node, k, "m0." + space.types[k]);
    }
  }
  return m0;
}

void require_uniform_actions(const Reader& rd, const toml::table& sec, const StateSpace& space,
                             const std::string& field) {
  const std::size_t A = space.max_actions();
  for (const auto& per_type : space.actions)
    for (const auto& acts : per_type)
      if (acts.size() != A) rd.bad(&sec, field, "table families need the same number of actions in every state");
}

TransitionKernelSpec read_kernel(const Reader& rd, const toml::table& root, const StateSpace& space,
                                 KernelMode mode) {
  const auto& sec = rd.table(root, "kernel", "kernel");
  const std::string family = rd.string(sec, "family", "kernel.family");
  const std::size_t K = space.type_count();
  const std::size_t S = space.state_count();
  TransitionKernelSpec spec;
  spec.mode = mode;
  if (family == "table") {
    require_uniform_actions(rd, sec, space, "kernel.q");
    const std::size_t A = space.max_actions();
    const Tensor q = rd.tensor(sec.get("q"), "kernel.q");
    const std::size_t off = with_type_axis(rd, q, 3, K, "kernel.q");
    expect_shape(rd, q, off, {S, A, S}, "kernel.q");
    spec.row = [q, off](double, std::size_t type, std::size_t x, std::size_t a, const Population&,
                        std::span<double> out) {
      const std::size_t start = flat_index(q, off, type, {x, a, 0});
      for (std::size_t y = 0; y < out.size(); ++y) out[y] = q.data[start + y];
    };
  } else if (family == "affine") {
    require_uniform_actions(rd, sec, space, "kernel.base");
    const std::size_t A = space.max_actions();
    const Tensor base = rd.tensor(sec.get("base"), "kernel.base");
    const std::size_t off = with_type_axis(rd, base, 3, K, "kernel.base");
    expect_shape(rd, base, off, {S, A, S}, "kernel.base");
    const Tensor coupling = rd.tensor(sec.get("coupling"), "kernel.coupling");
    const std::size_t coff = with_type_axis(rd, coupling, 4, K, "kernel.coupling");
    expect_shape(rd, coupling, coff, {S, A, S, K * S}, "kernel.coupling");
    spec.row = [base, off, coupling, coff](double, std::size_t type, std::size_t x, std::size_t a,
                                          const Population& m, std::span<double> out) {
      const auto flat = m.flat();
      const std::size_t start = flat_index(base, off, type, {x, a, 0});
      for (std::size_t y = 0; y < out.size(); ++y) {
        double v = base.data[start + y];
        const std::size_t c = flat_index(coupling, coff, type, {x, a, y, 0});
        for (std::size_t w = 0; w < flat.size(); ++w) v += coupling.data[c + w] * flat[w];
        out[y] = v;
      }
    };
  } else if (family == "revision") {
    // Built after the payoff is known.
  } else {
    rd.bad(sec.get("family"), "kernel.family", "unknown family '" + family + "' (table, affine, revision)");
  }
  return spec;
}

PayoffSpec read_payoff(const Reader& rd, const toml::table& root, const StateSpace& space) {
  const auto& sec = rd.table(root, "payoff", "payoff");
  const std::string family = rd.string(sec, "family", "payoff.family");
  const std::size_t K = space.type_count();
  const std::size_t S = space.state_count();
  require_uniform_actions(rd, sec, space, "payoff");
  const std::size_t A = space.max_actions();
  PayoffSpec payoff;

  auto read_base = [&](const char* key) {
    RunningTable table(K, std::vector<std::vector<double>>(S, std::vector<double>(A, 0.0)));
    const toml::node* node = sec.get(key);
    if (!node) return table;
    const std::string field = std::string("payoff.") + key;
    const Tensor t = rd.tensor(node, field);
    const std::size_t off = with_type_axis(rd, t, 2, K, field);
    expect_shape(rd, t, off, {S, A}, field);
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t x = 0; x < S; ++x)
        for (std::size_t a = 0; a < A; ++a) table[k][x][a] = t.data[flat_index(t, off, k, {x, a})];
    return table;
  };

  if (family == "table") {
    const RunningTable running = read_base("running");
    payoff.running = [running](double, std::size_t k, std::size_t x, std::size_t a, const Population&) {
      return running[k][x][a];
    };
  } else if (family == "pairwise" || family == "matrix") {
    PairwisePayoff pw;
    pw.base = read_base("base");
    pw.pairwise.assign(K, std::vector<std::vector<std::vector<double>>>(
                              S, std::vector<std::vector<double>>(A, std::vector<double>(K * S, 0.0))));
    if (family == "pairwise") {
      const Tensor t = rd.tensor(sec.get("pairwise"), "payoff.pairwise");
      const std::size_t off = with_type_axis(rd, t, 3, K, "payoff.pairwise");
      expect_shape(rd, t, off, {S, A, K * S}, "payoff.pairwise");
      for (std::size_t k = 0; k < K; ++k)
        for (std::size_t x = 0; x < S; ++x)
          for (std::size_t a = 0; a < A; ++a)
            for (std::size_t w = 0; w < K * S; ++w) pw.pairwise[k][x][a][w] = t.data[flat_index(t, off, k, {x, a, w})];
    } else {
      const Tensor t = rd.tensor(sec.get("A"), "payoff.A");
      const std::size_t off = with_type_axis(rd, t, 2, K, "payoff.A");
      expect_shape(rd, t, off, {S, K * S}, "payoff.A");
      for (std::size_t k = 0; k < K; ++k)
        for (std::size_t x = 0; x < S; ++x)
          for (std::size_t a = 0; a < A; ++a)
            for (std::size_t w = 0; w < K * S; ++w) pw.pairwise[k][x][a][w] = t.data[flat_index(t, off, k, {x, w})];
    }
    payoff.running = make_pairwise_running(pw);
    payoff.pairwise = std::move(pw);
  } else {
    rd.bad(sec.get("family"), "payoff.family", "unknown family '" + family + "' (table, pairwise, matrix)");
  }

  std::vector<std::vector<double>> terminal(K, std::vector<double>(S, 0.0));
  if (const auto* node = sec.get("terminal")) {
    const Tensor t = rd.tensor(node, "payoff.terminal");
    const std::size_t off = with_type_axis(rd, t, 1, K, "payoff.terminal");
    expect_shape(rd, t, off, {S}, "payoff.terminal");
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t x = 0; x < S; ++x) terminal[k][x] = t.data[flat_index(t, off, k, {x})];
  }
  payoff.terminal = [terminal](std::size_t k, std::size_t x, const Population&) { return terminal[k][x]; };
  return payoff;
}

CsmaSpec read_csma(const Reader& rd, const toml::table& sec) {
  CsmaSpec spec;
  auto& p = spec.params;
  p.gamma = rd.number(sec, "gamma", "csma.gamma", 1.0);
  p.beta2 = rd.number(sec, "beta2", "csma.beta2", 0.0);
  p.beta3 = rd.number(sec, "beta3", "csma.beta3", 0.0);
  const toml::node* knode = sec.get("K");
  if (!knode) rd.bad(&sec, "csma.K", "missing maximal backoff index");
  if (knode->is_integer()) {
    p.max_backoff = {rd.count(sec, "K", "csma.K")};
  } else {
    p.max_backoff.clear();
    for (double v : rd.vector(knode, "csma.K")) {
      if (v < 0 || v != std::floor(v)) rd.bad(knode, "csma.K", "backoff indices must be nonnegative integers");
      p.max_backoff.push_back(static_cast<std::size_t>(v));
    }
  }
  const Tensor u = rd.tensor(sec.get("attempt"), "csma.attempt");
  p.attempt.clear();
  if (u.rank() == 1) {
    if (p.max_backoff.size() != 1) rd.bad(u.node, "csma.attempt", "multi-class CSMA needs one row per class");
    p.attempt.push_back(u.data);
  } else if (u.rank() == 2) {
    for (std::size_t k = 0; k < u.shape[0]; ++k)
      p.attempt.emplace_back(u.data.begin() + static_cast<long>(k * u.shape[1]),
                             u.data.begin() + static_cast<long>((k + 1) * u.shape[1]));
  } else {
    rd.bad(u.node, "csma.attempt", "expected a vector or a matrix");
  }
  if (const auto* node = sec.get("type_shares")) p.type_shares = rd.vector(node, "csma.type_shares");
  spec.n = rd.count(sec, "n", "csma.n", 1000);
  spec.slots = rd.count(sec, "slots", "csma.slots", 100000);
  spec.burn_in = rd.count(sec, "burn_in", "csma.burn_in", spec.slots / 10);
  return spec;
}

MkvSpec read_mkv(const Reader& rd, const toml::table& sec) {
  MkvSpec spec;
  spec.model = rd.string(sec, "model", "mkv.model");
  const double mean0 = rd.number(sec, "mean0", "mkv.mean0", 0.0);
  const double var0 = rd.number(sec, "var0", "mkv.var0", 1.0);
  if (spec.model == "ou") {
    spec.a = rd.number(sec, "a", "mkv.a");
    spec.b = rd.number(sec, "b", "mkv.b", 0.0);
    spec.s = rd.number(sec, "s", "mkv.s");
    if (!(spec.a > 0.0)) rd.bad(sec.get("a"), "mkv.a", "mean reversion must be > 0");
    spec.particles = mkv::ou_model(spec.a, spec.b, spec.s, mean0, var0);
  } else if (spec.model == "pure-drift") {
    spec.particles = mkv::pure_drift_model(rd.number(sec, "c", "mkv.c"), mean0, var0);
  } else if (spec.model == "custom-table") {
    // f = d0 + d1 x + d2 w, σ = s0 + s1 x + s2 w
    const auto d = rd.vector(sec.get("drift"), "mkv.drift");
    const auto s = rd.vector(sec.get("volatility"), "mkv.volatility");
    if (d.size() != 3) rd.bad(sec.get("drift"), "mkv.drift", "expected [d0, d1, d2]");
    if (s.size() != 3) rd.bad(sec.get("volatility"), "mkv.volatility", "expected [s0, s1, s2]");
    auto& m = spec.particles;
    m.name = "custom-table";
    m.drift = [d](double, double x, double, double w) { return d[0] + d[1] * x + d[2] * w; };
    m.volatility = [s](double, double x, double, double w) { return s[0] + s[1] * x + s[2] * w; };
    m.affine_drift = mkv::AffineForm{[d](double, double x, double) { return d[0] + d[1] * x; },
                                     [d](double, double, double) { return d[2]; }};
    m.affine_volatility = mkv::AffineForm{[s](double, double x, double) { return s[0] + s[1] * x; },
                                          [s](double, double, double) { return s[2]; }};
    m.initial_mean = mean0;
    m.initial_variance = var0;
  } else {
    rd.bad(sec.get("model"), "mkv.model", "unknown model '" + spec.model + "' (ou, pure-drift, custom-table)");
  }
  if (const auto* node = sec.get("initial_positions")) spec.particles.initial_positions = rd.vector(node, "mkv.initial_positions");
  spec.n = rd.count(sec, "n", "mkv.n", 2000);
  spec.dt = rd.number(sec, "dt", "mkv.dt", 1e-3);
  spec.T = rd.number(sec, "T", "mkv.T", 5.0);
  return spec;
}

}  // namespace

ScenarioDocument parse_scenario(std::string_view text, std::string source) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    const auto& where = e.source().begin;
    fail(ErrorCode::ConfigParseError, source + ":" + std::to_string(where.line) + ":" +
                                          std::to_string(where.column) + ": " + std::string(e.description()));
  }
  const Reader rd(source);
  ScenarioDocument doc;
  doc.source = source;
  doc.name = rd.string(root, "name", "name", "unnamed");

  if (const auto* sec = rd.optional_table(root, "mkv", "mkv")) {
    doc.mkv = read_mkv(rd, *sec);
    return doc;
  }
  if (const auto* sec = rd.optional_table(root, "csma", "csma")) {
    doc.csma = read_csma(rd, *sec);
    std::size_t stages = doc.csma->slots;
    if (const auto* h = rd.optional_table(root, "horizon", "horizon")) stages = rd.count(*h, "stages", "horizon.stages", stages);
    ScenarioModel model = nplayer::csma_scenario(doc.csma->params, doc.csma->n, false, stages);
    model.name = doc.name;
    doc.scenario = std::move(model);
    return doc;
  }

  ScenarioModel model;
  model.name = doc.name;
  model.space = read_space(rd, root);
  model.horizon = read_horizon(rd, root);
  model.m0 = read_m0(rd, root, model.space);
  if (const auto* node = root.get("type_shares")) model.type_shares = rd.vector(node, "type_shares");
  if (const auto* m0 = root.get("m0"); m0 && m0->as_table() && m0->as_table()->get("type_shares")) {
    model.type_shares = rd.vector(m0->as_table()->get("type_shares"), "m0.type_shares");
  }
  model.clock_rate = rd.number(root, "clock_rate", "clock_rate", 1.0);
  model.payoff = read_payoff(rd, root, model.space);
  model.kernel = read_kernel(rd, root, model.space, model.horizon.mode);

  const auto& ksec = rd.table(root, "kernel", "kernel");
  if (rd.string(ksec, "family", "kernel.family") == "revision") {
    if (model.horizon.mode != KernelMode::ContinuousRate) {
      rd.bad(ksec.get("family"), "kernel.family", "revision kernels need a continuous horizon");
    }
    RevisionSpec spec;
    spec.protocol = rd.string(ksec, "protocol", "kernel.protocol", "replicator");
    spec.temperature = rd.number(ksec, "temperature", "kernel.temperature", 0.1);
    spec.mutation = rd.number(ksec, "mutation", "kernel.mutation", 0.0);
    try {
      (void)dynamics::parse_protocol(spec.protocol);
    } catch (const Error&) {
      rd.bad(ksec.get("protocol"), "kernel.protocol", "unknown protocol '" + spec.protocol + "'");
    }
    if (model.type_shares.empty()) model.type_shares.assign(model.space.type_count(), 1.0 / static_cast<double>(model.space.type_count()));
    doc.scenario = dynamics::revision_scenario(model, spec);
    doc.scenario->name = doc.name;
    return doc;
  }
  doc.scenario = validate_scenario(std::move(model));
  return doc;
}

ScenarioDocument load_scenario_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::ConfigParseError, path + ": cannot open scenario file");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario(text.str(), path);
}

ScenarioModel load_scenario(const std::string& path) {
  ScenarioDocument doc = load_scenario_file(path);
  if (!doc.scenario) fail(ErrorCode::ConfigParseError, path + ": file describes a particle model, not a finite scenario");
  return std::move(*doc.scenario);
}

}  // namespace mfg::io
