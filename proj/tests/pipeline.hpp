#pragma once

#include <optional>
#include <vector>

#include <sizegraph/sizegraph.hpp>

namespace testsupport {

/// A synthetic world split into train/test orders with a bundle built on the
/// browse events plus the train orders.
struct World {
  sizegraph::SynthData data;
  sizegraph::OrderSplit split;
  sizegraph::ModelBundle bundle;

  std::vector<sizegraph::InteractionEvent> training_events() const {
    auto all = data.events;
    all.insert(all.end(), split.train.begin(), split.train.end());
    return all;
  }

  sizegraph::EvalReport evaluate(sizegraph::EvalMethod m) const {
    return sizegraph::evaluate(m, bundle, split.train, split.test);
  }
};

inline World make_world(const sizegraph::SynthConfig& cfg, std::uint64_t split_seed,
                        const sizegraph::BuildOptions& opt = {},
                        std::optional<sizegraph::SkipGramConfig> skipgram = std::nullopt,
                        double test_fraction = 0.1) {
  World w;
  w.data = sizegraph::synth_generate(cfg);
  w.split = sizegraph::split_orders(w.data.orders, test_fraction, split_seed);
  w.bundle = sizegraph::build_bundle(w.training_events(), cfg.category, opt);
  if (skipgram) sizegraph::attach_skipgram(w.bundle, w.split.train, *skipgram);
  return w;
}

}  // namespace testsupport
