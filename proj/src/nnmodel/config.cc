// Copyright 2026 The FPETS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fpets/nnmodel/config.h"

#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "fpets/numcore/checkpoint.h"
#include "fpets/numcore/errors.h"

namespace fpets::nn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long n = std::stoll(v, &used);
    if (used != v.size() || n < 0) throw std::invalid_argument(v);
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a count, got '" + v + "'");
  }
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::string fmt_real(double x) {
  std::ostringstream o;
  o.precision(17);
  o << x;
  return o.str();
}

struct Field {
  std::function<std::string(const ModelConfig&)> get;
  std::function<void(ModelConfig&, const std::string&, const std::string&)> set;
};

#define COUNT_FIELD(name)                                                   \
  {#name, {[](const ModelConfig& c) { return std::to_string(c.name); },     \
           [](ModelConfig& c, const std::string& k, const std::string& v) { \
             c.name = parse_count(k, v);                                    \
           }}}
#define REAL_FIELD(name)                                                    \
  {#name, {[](const ModelConfig& c) { return fmt_real(c.name); },           \
           [](ModelConfig& c, const std::string& k, const std::string& v) { \
             c.name = parse_real(k, v);                                     \
           }}}
#define BOOL_FIELD(name)                                                    \
  {#name, {[](const ModelConfig& c) {                                       \
             return std::string(c.name ? "true" : "false");                 \
           },                                                               \
           [](ModelConfig& c, const std::string& k, const std::string& v) { \
             c.name = parse_bool(k, v);                                     \
           }}}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      COUNT_FIELD(vocab_size),
      COUNT_FIELD(embedding_dim),
      COUNT_FIELD(feature_dim),
      COUNT_FIELD(encoder_hidden),
      COUNT_FIELD(encoder_layers),
      COUNT_FIELD(encoder_kernel),
      COUNT_FIELD(encoder_filter),
      COUNT_FIELD(align_layers),
      COUNT_FIELD(align_hidden),
      COUNT_FIELD(align_kernel),
      COUNT_FIELD(align_filter),
      COUNT_FIELD(cnn_decoder_layers),
      COUNT_FIELD(cnn_decoder_kernel),
      COUNT_FIELD(cnn_decoder_filter),
      COUNT_FIELD(ufans_decoder_layers),
      COUNT_FIELD(ufans_decoder_hidden),
      COUNT_FIELD(ufans_decoder_kernel),
      COUNT_FIELD(ufans_decoder_filter),
      REAL_FIELD(dropout),
      REAL_FIELD(align_loss_weight),
      REAL_FIELD(align_loss_threshold),
      REAL_FIELD(width_floor),
      COUNT_FIELD(num_frequencies),
      BOOL_FIELD(frequencies_trainable),
      REAL_FIELD(gaussian_sigma),
      BOOL_FIELD(fixed_positions),
      COUNT_FIELD(seed),
      {"kernel",
       {[](const ModelConfig& c) {
          return std::string(c.kernel == align::Kernel::kGaussian ? "gaussian"
                                                                  : "sincos");
        },
        [](ModelConfig& c, const std::string& k, const std::string& v) {
          if (v == "gaussian") {
            c.kernel = align::Kernel::kGaussian;
          } else if (v == "sincos") {
            c.kernel = align::Kernel::kSineCosine;
          } else {
            throw ConfigError("config key '" + k + "': expected sincos or gaussian, got '" + v + "'");
          }
        }}},
      {"normalization",
       {[](const ModelConfig& c) {
          return std::string(c.normalization == align::Normalization::kSoftmax
                                 ? "softmax"
                                 : "sum");
        },
        [](ModelConfig& c, const std::string& k, const std::string& v) {
          if (v == "softmax") {
            c.normalization = align::Normalization::kSoftmax;
          } else if (v == "sum") {
            c.normalization = align::Normalization::kSum;
          } else {
            throw ConfigError("config key '" + k + "': expected sum or softmax, got '" + v + "'");
          }
        }}},
  };
  return table;
}

#undef COUNT_FIELD
#undef REAL_FIELD
#undef BOOL_FIELD

}  // namespace

ModelConfig ModelConfig::full_scale() {
  ModelConfig c;
  c.embedding_dim = 512;
  c.encoder_hidden = 512;
  c.encoder_filter = 1024;
  c.align_hidden = 512;
  c.align_filter = 1024;
  c.cnn_decoder_filter = 1024;
  c.ufans_decoder_hidden = 512;
  c.ufans_decoder_filter = 1024;
  c.num_frequencies = 64;
  return c;
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("config: ") + name + " must be positive");
  };
  auto kernel = [](std::size_t v, const char* name) {
    if (v == 0 || v % 2 == 0) {
      throw ConfigError(std::string("config: ") + name + " must be odd, got " +
                        std::to_string(v));
    }
  };
  auto filter = [](std::size_t v, const char* name) {
    if (v < 2 || v % 2 != 0) {
      throw ConfigError(std::string("config: ") + name +
                        " must be even (it is split into tanh and sigmoid halves), got " +
                        std::to_string(v));
    }
  };
  auto depth = [](std::size_t v, const char* name) {
    if (v < 1 || v > 16) {
      throw ConfigError(std::string("config: ") + name + " must lie in [1, 16], got " +
                        std::to_string(v));
    }
  };
  positive(vocab_size, "vocab_size");
  positive(embedding_dim, "embedding_dim");
  positive(feature_dim, "feature_dim");
  positive(encoder_hidden, "encoder_hidden");
  positive(encoder_layers, "encoder_layers");
  kernel(encoder_kernel, "encoder_kernel");
  filter(encoder_filter, "encoder_filter");
  depth(align_layers, "align_layers");
  positive(align_hidden, "align_hidden");
  kernel(align_kernel, "align_kernel");
  filter(align_filter, "align_filter");
  positive(cnn_decoder_layers, "cnn_decoder_layers");
  kernel(cnn_decoder_kernel, "cnn_decoder_kernel");
  filter(cnn_decoder_filter, "cnn_decoder_filter");
  depth(ufans_decoder_layers, "ufans_decoder_layers");
  positive(ufans_decoder_hidden, "ufans_decoder_hidden");
  kernel(ufans_decoder_kernel, "ufans_decoder_kernel");
  filter(ufans_decoder_filter, "ufans_decoder_filter");
  positive(num_frequencies, "num_frequencies");
  if (!(dropout >= 0 && dropout < 1)) throw ConfigError("config: dropout must lie in [0, 1)");
  if (!(align_loss_weight >= 0)) throw ConfigError("config: align_loss_weight must be >= 0");
  if (!(align_loss_threshold >= 0)) throw ConfigError("config: align_loss_threshold must be >= 0");
  if (!(width_floor > 0)) throw ConfigError("config: width_floor must be positive");
  if (!(gaussian_sigma > 0)) throw ConfigError("config: gaussian_sigma must be positive");
}

std::string ModelConfig::to_string() const {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + "=" + field.get(*this) + "\n";
  return out;
}

void ModelConfig::set(const std::string& key, const std::string& value) {
  auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(*this, key, value);
}

ModelConfig ModelConfig::parse(const std::string& text) {
  return parse(text, ModelConfig{});
}

ModelConfig ModelConfig::parse(const std::string& text, ModelConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    base.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  base.validate();
  return base;
}

std::uint64_t ModelConfig::hash() const { return fnv1a64(to_string()); }

align::CodecConfig ModelConfig::codec_config() const {
  align::CodecConfig c;
  c.num_frequencies = num_frequencies;
  c.trainable = frequencies_trainable;
  c.kernel = kernel;
  c.gaussian_sigma = gaussian_sigma;
  return c;
}

}  // namespace fpets::nn
