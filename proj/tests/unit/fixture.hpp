#pragma once

#include "ami/datagen.hpp"
#include "ami/model.hpp"
#include "ami/witness.hpp"

namespace labtest {

// One small trained setup shared by the steering / attack / evaluation
// suites, built once on first use. Small enough to train in a couple of
// seconds, noisy enough that witnesses exist and margins are not absurd.
struct Lab {
  ami::Dataset data;
  ami::Dataset train_split;
  ami::Dataset holdout;
  ami::TrainedModel model;
  ami::WitnessMap map;
};

inline const Lab& lab() {
  static const Lab instance = [] {
    Lab l;
    ami::DatagenConfig dc;
    dc.classes = 8;
    dc.per_class = 12;
    dc.noise_sigma = 0.25;
    dc.seed = 5;
    l.data = ami::generate(dc);
    auto parts = ami::split_dataset(l.data, 0.75);
    l.train_split = parts.first;
    l.holdout = parts.second;
    ami::Hyper h;
    h.epochs = 8;
    h.batch = 8;
    h.learning_rate = 0.05;
    l.model = ami::train(
        ami::default_spec(l.data.num_classes, l.data.height, l.data.width),
        l.train_split, h);
    ami::WitnessConfig wc;
    wc.sample_count = 24;
    wc.randomizations = 3;
    l.map = ami::extract_witnesses(l.model.net, l.train_split, wc);
    return l;
  }();
  return instance;
}

}  // namespace labtest
