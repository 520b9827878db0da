#pragma once

#include <vector>

#include "trajad/generator.hpp"
#include "trajad/predictor.hpp"

namespace trajad::fixtures {

inline const std::vector<Scenario>& normals() {
  static const std::vector<Scenario> data = generate_dataset(101, 240, GeneratorConfig{});
  return data;
}

// Briefly trained and frozen; good enough for attack and gradient tests.
inline const PredictorModel& predictor() {
  static const PredictorModel model = [] {
    PredictorHyperparams hp;
    hp.epochs = 4;
    return train_predictor(normals(), hp);
  }();
  return model;
}

}  // namespace trajad::fixtures
