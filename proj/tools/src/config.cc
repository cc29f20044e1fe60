#include "config.h"

#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "fedleak/error.h"

namespace fedleak::cli {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& why) {
  throw ConfigError(path + ": " + why);
}

// A JSON object plus its dotted path; remembers which keys were read so
// that typos surface as unknown-field errors.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  const std::string& path() const { return path_; }
  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }
  Node child(const std::string& key) { return Node(raw(key), at(key)); }

  std::size_t size(const std::string& key, std::size_t def) {
    return has(key) ? as_size(raw(key), at(key)) : def;
  }
  double real(const std::string& key, double def) {
    return has(key) ? as_real(raw(key), at(key)) : def;
  }
  std::string str(const std::string& key, std::string def) {
    return has(key) ? as_str(raw(key), at(key)) : def;
  }
  bool flag(const std::string& key, bool def) {
    if (!has(key)) return def;
    if (!raw(key).is_boolean()) fail(at(key), "expected true or false");
    return raw(key).get<bool>();
  }
  std::string required_str(const std::string& key) {
    if (!has(key)) fail(at(key), "required field is missing");
    return as_str(raw(key), at(key));
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) fail(at(key), "unknown field");
    }
  }

  static std::size_t as_size(const json& v, const std::string& path) {
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      fail(path, "expected a non-negative integer");
    }
    return v.get<std::size_t>();
  }
  static double as_real(const json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
  }
  static std::string as_str(const json& v, const std::string& path) {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename T, typename Fn>
std::vector<T> list(Node& node, const std::string& key, std::vector<T> def, Fn&& convert) {
  if (!node.has(key)) return def;
  const json& arr = node.raw(key);
  if (!arr.is_array()) fail(node.at(key), "expected a list");
  std::vector<T> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    out.push_back(convert(arr[i], node.at(key) + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

template <typename Fn>
auto guarded(const std::string& path, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    fail(path, e.what());
  }
}

DatasetBlock parse_dataset(Node n, const std::filesystem::path& base) {
  DatasetBlock d;
  const std::string kind = n.str("kind", "synthetic");
  if (kind == "synthetic") {
    d.kind = DatasetBlock::Kind::kSynthetic;
    d.classes = n.size("classes", d.classes);
    d.per_class = n.size("per_class", d.per_class);
    d.test_per_class = n.size("test_per_class", d.test_per_class);
    d.side = n.size("side", d.side);
    d.channels = n.size("channels", d.channels);
    if (d.classes < 2) fail(n.at("classes"), "need at least 2 classes");
    if (d.per_class < 1) fail(n.at("per_class"), "need at least 1 example per class");
    if (d.test_per_class < 1) fail(n.at("test_per_class"), "need at least 1 test example per class");
    if (d.side < 4) fail(n.at("side"), "side must be at least 4");
    if (d.channels < 1) fail(n.at("channels"), "need at least 1 channel");
  } else if (kind == "idx") {
    d.kind = DatasetBlock::Kind::kIdx;
    d.images = resolve(base, n.required_str("images"));
    d.labels = resolve(base, n.required_str("labels"));
    d.test_images = resolve(base, n.required_str("test_images"));
    d.test_labels = resolve(base, n.required_str("test_labels"));
  } else {
    fail(n.at("kind"), "expected 'synthetic' or 'idx', got '" + kind + "'");
  }
  n.finish();
  return d;
}

nn::Activation parse_act(Node& n) {
  const std::string name = n.str("activation", "sigmoid");
  return guarded(n.at("activation"), [&] { return nn::parse_activation(name); });
}

nn::NetworkSpec parse_network(Node n) {
  const auto shape = list<std::size_t>(n, "input_shape", {}, Node::as_size);
  if (shape.empty()) fail(n.at("input_shape"), "required field is missing or empty");
  if (!n.has("layers") || !n.raw("layers").is_array() || n.raw("layers").empty()) {
    fail(n.at("layers"), "expected a non-empty list of layers");
  }
  std::vector<nn::Layer> layers;
  const json& arr = n.raw("layers");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    Node l(arr[i], n.at("layers") + "[" + std::to_string(i) + "]");
    const std::string type = l.required_str("type");
    if (type == "dense") {
      nn::Dense d;
      d.in_dim = l.size("in", 0);
      d.out_dim = l.size("out", 0);
      d.activation = parse_act(l);
      layers.emplace_back(d);
    } else if (type == "conv2d") {
      nn::Conv2d c;
      c.in_channels = l.size("in_channels", 0);
      c.out_channels = l.size("out_channels", 0);
      c.kernel_size = l.size("kernel_size", 0);
      c.stride = l.size("stride", 1);
      c.padding = l.size("padding", 0);
      c.activation = parse_act(l);
      layers.emplace_back(c);
    } else if (type == "flatten") {
      layers.emplace_back(nn::Flatten{});
    } else {
      fail(l.at("type"), "expected dense, conv2d or flatten, got '" + type + "'");
    }
    l.finish();
  }
  n.finish();
  return guarded(n.path(), [&] { return nn::NetworkSpec(shape, layers); });
}

defense::NoiseFamily parse_family(Node& n) {
  const std::string name = n.str("family", "gaussian");
  return guarded(n.at("family"), [&] { return defense::parse_noise_family(name); });
}

defense::MechanismConfig parse_mechanism(Node n) {
  const std::string kind = n.str("kind", "none");
  defense::MechanismConfig m;
  if (kind == "none") {
    m = defense::NoDefense{};
  } else if (kind == "dp") {
    defense::DpNoise dp;
    dp.family = parse_family(n);
    dp.sigma = n.real("sigma", 0.0);
    m = dp;
  } else if (kind == "ppdl") {
    defense::Ppdl p;
    p.theta = n.real("theta", 1.0);
    p.sigma = n.real("sigma", 0.0);
    p.family = parse_family(n);
    m = p;
  } else if (kind == "spn") {
    defense::SpnDefense s;
    s.options.alpha1 = n.real("alpha1", s.options.alpha1);
    s.options.alpha2 = n.real("alpha2", s.options.alpha2);
    s.options.margin = n.real("margin", s.options.margin);
    s.options.bits = n.size("bits", s.options.bits);
    m = s;
  } else {
    fail(n.at("kind"), "expected none, dp, ppdl or spn, got '" + kind + "'");
  }
  n.finish();
  guarded(n.path(), [&] {
    defense::validate(m);
    return 0;
  });
  return m;
}

fed::FedConfig parse_fed(Node n) {
  fed::FedConfig f;
  f.clients = n.size("clients", f.clients);
  f.rounds = n.size("rounds", f.rounds);
  f.local_epochs = n.size("local_epochs", f.local_epochs);
  f.batch_size = n.size("batch_size", f.batch_size);
  f.victim = n.size("victim", f.victim);
  f.jobs = n.size("jobs", f.jobs);
  if (n.has("optimizer")) {
    Node o = n.child("optimizer");
    const std::string kind = o.str("kind", "adam");
    if (kind == "sgd") {
      fed::Sgd s;
      s.lr = o.real("lr", s.lr);
      s.momentum = o.real("momentum", s.momentum);
      f.optimizer = s;
    } else if (kind == "adam") {
      fed::AdamOpt a;
      a.lr = o.real("lr", a.lr);
      a.beta1 = o.real("beta1", a.beta1);
      a.beta2 = o.real("beta2", a.beta2);
      f.optimizer = a;
    } else {
      fail(o.at("kind"), "expected sgd or adam, got '" + kind + "'");
    }
    o.finish();
  }
  if (n.has("lr_decay")) {
    Node d = n.child("lr_decay");
    f.decay.factor = d.real("factor", f.decay.factor);
    f.decay.milestones = list<std::size_t>(d, "milestones", {}, Node::as_size);
    d.finish();
  }
  if (n.has("aggregation")) {
    const std::string name = Node::as_str(n.raw("aggregation"), n.at("aggregation"));
    f.aggregation = guarded(n.at("aggregation"), [&] { return fed::parse_aggregation(name); });
  }
  if (n.has("partition")) {
    Node p = n.child("partition");
    const std::string kind = p.str("kind", "iid");
    if (kind == "iid") {
      f.partition = data::Iid{};
    } else if (kind == "dirichlet") {
      f.partition = data::Dirichlet{p.real("alpha", 0.9)};
    } else {
      fail(p.at("kind"), "expected iid or dirichlet, got '" + kind + "'");
    }
    p.finish();
  }
  if (n.has("capture")) {
    Node c = n.child("capture");
    f.capture.rounds = list<std::size_t>(c, "rounds", f.capture.rounds, Node::as_size);
    f.capture.per_round = c.size("per_round", f.capture.per_round);
    f.capture.deltas = c.flag("deltas", f.capture.deltas);
    c.finish();
  }
  n.finish();
  return f;
}

attack::AttackConfig parse_attack_config(Node& n) {
  attack::AttackConfig a;
  a.max_iters = n.size("max_iters", a.max_iters);
  a.tol = n.real("tol", a.tol);
  if (n.has("optimizer")) {
    Node o = n.child("optimizer");
    const std::string kind = o.str("kind", "lbfgs");
    if (kind == "lbfgs") {
      attack::Lbfgs l;
      l.memory = o.size("memory", l.memory);
      a.optimizer = l;
    } else if (kind == "adam") {
      attack::Adam ad;
      ad.lr = o.real("lr", ad.lr);
      ad.beta1 = o.real("beta1", ad.beta1);
      ad.beta2 = o.real("beta2", ad.beta2);
      a.optimizer = ad;
    } else {
      fail(o.at("kind"), "expected lbfgs or adam, got '" + kind + "'");
    }
    o.finish();
  }
  if (n.has("init")) {
    Node i = n.child("init");
    const std::string kind = i.str("kind", "pattern");
    if (kind == "pattern") {
      a.init = attack::PatternRamp{i.real("noise", 0.05)};
    } else if (kind == "uniform") {
      a.init = attack::UniformNoise{i.real("lo", 0.0), i.real("hi", 1.0)};
    } else {
      fail(i.at("kind"), "expected pattern or uniform, got '" + kind + "'");
    }
    i.finish();
  }
  if (n.has("gradient")) {
    Node g = n.child("gradient");
    const std::string kind = g.str("kind", "nested_reverse");
    if (kind == "nested_reverse") {
      a.gradient = attack::NestedReverse{};
    } else if (kind == "finite_difference") {
      a.gradient = attack::FiniteDifference{g.real("h", 1e-4)};
    } else {
      fail(g.at("kind"), "expected nested_reverse or finite_difference, got '" + kind + "'");
    }
    g.finish();
  }
  guarded(n.path(), [&] {
    a.validate();
    return 0;
  });
  return a;
}

AttackBlock parse_attack(Node n, const std::filesystem::path& base) {
  AttackBlock b;
  b.config = parse_attack_config(n);
  b.batch_sizes = list<std::size_t>(n, "batch_sizes", b.batch_sizes, Node::as_size);
  if (b.batch_sizes.empty()) fail(n.at("batch_sizes"), "need at least one batch size");
  for (std::size_t bs : b.batch_sizes) {
    if (bs == 0) fail(n.at("batch_sizes"), "batch sizes must be positive");
  }
  b.kinds = list<eval::AttackKind>(n, "kinds", b.kinds, [](const json& v, const std::string& p) {
    const std::string name = Node::as_str(v, p);
    return guarded(p, [&] { return eval::parse_attack_kind(name); });
  });
  if (b.kinds.empty()) fail(n.at("kinds"), "need at least one attack kind");
  b.analytic = n.flag("analytic", b.analytic);
  if (n.has("transcript")) b.transcript = resolve(base, Node::as_str(n.raw("transcript"), n.at("transcript")));
  n.finish();
  return b;
}

SweepBlock parse_sweep(Node n) {
  SweepBlock s;
  if (!n.has("mechanism")) fail(n.at("mechanism"), "required field is missing");
  s.mechanism = parse_mechanism(n.child("mechanism"));
  s.strengths = list<double>(n, "strengths", {}, Node::as_real);
  if (s.strengths.empty()) fail(n.at("strengths"), "need at least one strength");
  for (std::size_t i = 0; i < s.strengths.size(); ++i) {
    const std::string p = n.at("strengths") + "[" + std::to_string(i) + "]";
    guarded(p, [&] {
      defense::validate(defense::with_strength(s.mechanism, s.strengths[i]));
      return 0;
    });
  }
  s.seeds = list<std::uint64_t>(n, "seeds", s.seeds, [](const json& v, const std::string& p) {
    return static_cast<std::uint64_t>(Node::as_size(v, p));
  });
  if (s.seeds.empty()) fail(n.at("seeds"), "need at least one seed");
  n.finish();
  return s;
}

nn::NetworkSpec default_network(const DatasetBlock& d) {
  const std::size_t in = d.side * d.side * d.channels;
  return nn::NetworkSpec({in}, {nn::Dense{in, 32, nn::Activation::kSigmoid},
                                nn::Dense{32, d.classes, nn::Activation::kSigmoid}});
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  Node root(doc, "");
  ExperimentConfig cfg;
  if (root.has("seed")) cfg.seed = Node::as_size(root.raw("seed"), "seed");
  cfg.jobs = root.size("jobs", cfg.jobs);
  if (cfg.jobs < 1) fail("jobs", "must be at least 1");
  if (root.has("output_dir")) {
    cfg.output_dir = resolve(base_dir, Node::as_str(root.raw("output_dir"), "output_dir"));
  } else {
    cfg.output_dir = base_dir / "out";
  }
  if (root.has("dataset")) cfg.dataset = parse_dataset(root.child("dataset"), base_dir);
  cfg.network = root.has("network") ? parse_network(root.child("network"))
                                    : default_network(cfg.dataset);
  if (root.has("fed")) cfg.fed = parse_fed(root.child("fed"));
  if (root.has("mechanism")) cfg.mechanism = parse_mechanism(root.child("mechanism"));
  if (root.has("sweep")) cfg.sweep = parse_sweep(root.child("sweep"));
  if (root.has("attack")) cfg.attack = parse_attack(root.child("attack"), base_dir);
  if (root.has("regions")) {
    Node r = root.child("regions");
    cfg.regions.green = r.real("green", cfg.regions.green);
    cfg.regions.red = r.real("red", cfg.regions.red);
    r.finish();
    guarded("regions", [&] {
      cfg.regions.validate();
      return 0;
    });
  }
  if (root.has("report")) {
    Node r = root.child("report");
    if (r.has("ppc")) cfg.report_input = resolve(base_dir, Node::as_str(r.raw("ppc"), "report.ppc"));
    r.finish();
  }
  root.finish();

  cfg.fed.mechanisms = {cfg.mechanism};
  cfg.fed.seed = cfg.seed;
  guarded("fed", [&] {
    cfg.fed.validate();
    return 0;
  });
  const auto& net = cfg.net();
  if (cfg.dataset.kind == DatasetBlock::Kind::kSynthetic) {
    const std::size_t pixels = cfg.dataset.side * cfg.dataset.side * cfg.dataset.channels;
    if (nn::shape_size(net.input_shape()) != pixels) {
      fail("network.input_shape", "holds " + std::to_string(nn::shape_size(net.input_shape())) +
                                      " values but dataset images have " + std::to_string(pixels));
    }
    if (net.num_classes() < cfg.dataset.classes) {
      fail("network.layers", "final layer has fewer outputs than dataset.classes");
    }
    const std::size_t train_size = cfg.dataset.classes * cfg.dataset.per_class;
    if (cfg.fed.clients > train_size) fail("fed.clients", "more clients than training examples");
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.parent_path().empty() ? "." : path.parent_path());
}

}  // namespace fedleak::cli
