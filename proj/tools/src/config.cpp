#include "config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "bodylift/error.hpp"

namespace bodylift::cli {

std::uint64_t default_seed() {
  if (const char* env = std::getenv("BODYLIFT_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto value = std::stoull(env, &used);
      if (used == std::string(env).size()) return value;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("BODYLIFT_SEED is not an unsigned integer: ") + env);
  }
  return 0;
}

nlohmann::ordered_json to_json(const train::TrainConfig& c) {
  nlohmann::ordered_json j;
  j["mode"] = train::to_string(c.mode);
  j["seed"] = c.seed;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["lr_decay"] = c.lr_decay;
  j["lr_decay_steps"] = c.lr_decay_steps;
  j["width"] = c.width;
  j["dropout"] = c.dropout;
  j["lambda_est"] = c.weights.est;
  j["lambda_perceptual"] = c.weights.perceptual;
  j["lambda_rec"] = c.weights.rec;
  j["lambda_disc_unlabeled"] = c.weights.disc_unlabeled;
  j["lambda_perc_unlabeled"] = c.weights.perc_unlabeled;
  j["reencode_source"] = train::to_string(c.reencode_source);
  j["detach_reencoder"] = c.detach_reencoder;
  j["disc_steps"] = c.disc_steps;
  j["patience"] = c.patience;
  j["root_index"] = c.root_index;
  return j;
}

void apply_json(const nlohmann::json& j, train::TrainConfig& c) {
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "mode") c.mode = train::parse_mode(v.get<std::string>());
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "epochs") c.epochs = v.get<std::size_t>();
      else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
      else if (key == "lr") c.lr = v.get<double>();
      else if (key == "lr_decay") c.lr_decay = v.get<double>();
      else if (key == "lr_decay_steps") c.lr_decay_steps = v.get<std::uint64_t>();
      else if (key == "width") c.width = v.get<std::size_t>();
      else if (key == "dropout") c.dropout = v.get<double>();
      else if (key == "lambda_est") c.weights.est = v.get<double>();
      else if (key == "lambda_perceptual") c.weights.perceptual = v.get<double>();
      else if (key == "lambda_rec") c.weights.rec = v.get<double>();
      else if (key == "lambda_disc_unlabeled") c.weights.disc_unlabeled = v.get<double>();
      else if (key == "lambda_perc_unlabeled") c.weights.perc_unlabeled = v.get<double>();
      else if (key == "reencode_source") c.reencode_source = train::parse_reencode_source(v.get<std::string>());
      else if (key == "detach_reencoder") c.detach_reencoder = v.get<bool>();
      else if (key == "disc_steps") c.disc_steps = v.get<std::size_t>();
      else if (key == "patience") c.patience = v.get<std::size_t>();
      else if (key == "root_index") c.root_index = v.get<std::size_t>();
      else throw ConfigError("unknown training config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad training config value: ") + e.what());
  }
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace bodylift::cli
