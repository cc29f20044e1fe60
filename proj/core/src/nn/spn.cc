#include "fedleak/nn/spn.h"

#include <set>
#include <string>

#include "fedleak/error.h"

namespace fedleak::nn {

void SpnConfig::validate(std::size_t feature_dim, std::size_t num_classes) const {
  if (!(alpha1 >= 0.0) || !(alpha2 >= 0.0)) throw ConfigError("SPN alphas must be non-negative");
  if (!(margin >= 1.0)) throw ConfigError("SPN margin must be >= 1");
  if (bits == 0) throw ConfigError("SPN needs at least one bit");
  if (codes.size() != num_classes) {
    throw ConfigError("SPN needs one target code per class (" + std::to_string(num_classes) +
                      "), got " + std::to_string(codes.size()));
  }
  std::set<Code> seen;
  for (const auto& code : codes) {
    if (code.size() != bits) throw ConfigError("SPN target code length differs from bit count");
    for (int b : code) {
      if (b != 1 && b != -1) throw ConfigError("SPN target codes must be in {-1, +1}");
    }
    if (!seen.insert(code).second) throw ConfigError("SPN target codes must be distinct");
  }
  if (head.weight.shape() != Shape{bits, feature_dim} || head.bias.shape() != Shape{bits}) {
    throw ConfigError("SPN head shape does not match " + std::to_string(bits) + "x" +
                      std::to_string(feature_dim));
  }
}

SpnConfig make_spn(const NetworkSpec& net, const SpnOptions& options, std::mt19937_64& rng) {
  SpnConfig spn;
  spn.alpha1 = options.alpha1;
  spn.alpha2 = options.alpha2;
  spn.margin = options.margin;
  spn.bits = options.bits;
  const std::size_t classes = net.num_classes();
  if (options.bits < 64 && (std::size_t{1} << options.bits) < classes) {
    throw ConfigError("SPN with " + std::to_string(options.bits) + " bits cannot give " +
                      std::to_string(classes) + " classes distinct codes");
  }
  std::bernoulli_distribution coin(0.5);
  std::set<Code> seen;
  while (spn.codes.size() < classes) {
    Code code(options.bits);
    for (int& b : code) b = coin(rng) ? 1 : -1;
    if (seen.insert(code).second) spn.codes.push_back(std::move(code));
  }
  spn.head = init_dense(net.feature_dim(), options.bits, rng);
  spn.validate(net.feature_dim(), classes);
  return spn;
}

}  // namespace fedleak::nn
