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

#include "fpets/alignment/alignment.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "fpets/numcore/errors.h"
#include "fpets/numcore/ops.h"
#include "fpets/numcore/tape.h"

namespace fpets::align {

PositionCodec::PositionCodec(const CodecConfig& config) : config_(config) {
  const std::size_t l = config.num_frequencies;
  if (l < 1) throw ConfigError("position codec needs at least one frequency");
  if (!(config.min_frequency > 0) || !(config.max_frequency >= config.min_frequency)) {
    throw ConfigError("frequency range must satisfy 0 < min <= max");
  }
  if (!(config.gaussian_sigma > 0)) {
    throw ConfigError("gaussian width must be positive, got " +
                      std::to_string(config.gaussian_sigma));
  }
  const double lo = std::log(config.min_frequency);
  const double hi = std::log(config.max_frequency);
  std::vector<Real> logs(l);
  if (config.random_init) {
    std::mt19937_64 rng(config.seed);
    for (auto& v : logs) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      v = static_cast<Real>(lo + (hi - lo) * u);
    }
    std::sort(logs.begin(), logs.end());
  } else {
    for (std::size_t k = 0; k < l; ++k) {
      const double t = l == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(l - 1);
      logs[k] = static_cast<Real>(lo + (hi - lo) * t);
    }
  }
  log_f_ = Tensor(Shape{l}, std::move(logs));
  log_f_.set_requires_grad(config.trainable);
  log_f_.set_tag("codec.log_freqs");
}

Tensor PositionCodec::frequencies() const {
  if (config_.trainable) return ops::exp(log_f_);
  NoGradScope no_grad;
  return ops::exp(log_f_);
}

std::vector<double> PositionCodec::frequency_values() const {
  std::vector<double> f(size());
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = std::exp(static_cast<double>(log_f_[k]));
  return f;
}

namespace {

void check_widths(std::span<const Real> r) {
  if (r.empty()) throw DimensionError("alignment widths must be non-empty");
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!(r[i] > 0)) {
      throw DomainError("alignment width r[" + std::to_string(i) + "] = " +
                        std::to_string(r[i]) + " is not positive");
    }
  }
}

}  // namespace

Tensor compute_positions(const Tensor& r) {
  check_widths(r.values());
  return ops::add(ops::cumsum_exclusive(r), ops::scale(r, Real(0.5)));
}

std::vector<double> compute_positions(std::span<const double> r) {
  if (r.empty()) throw DimensionError("alignment widths must be non-empty");
  std::vector<double> s(r.size());
  double acc = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!(r[i] > 0)) {
      throw DomainError("alignment width r[" + std::to_string(i) + "] = " +
                        std::to_string(r[i]) + " is not positive");
    }
    s[i] = acc + r[i] / 2;
    acc += r[i];
  }
  return s;
}

Tensor fixed_positions(std::size_t t_p, std::size_t t_a) {
  if (t_p < 1 || t_a < 1) throw DimensionError("fixed_positions needs T_p, T_a >= 1");
  Tensor s(Shape{t_p});
  const double step = static_cast<double>(t_a) / static_cast<double>(t_p);
  for (std::size_t i = 0; i < t_p; ++i) {
    s[i] = static_cast<Real>((static_cast<double>(i) + 0.5) * step);
  }
  return s;
}

namespace {

Tensor encode(const Tensor& x, const PositionCodec& codec) {
  const Tensor angles = ops::outer_div(x, codec.frequencies());
  return ops::concat_cols(ops::sin(angles), ops::cos(angles));
}

Tensor frame_indices(std::size_t t_a) {
  if (t_a < 1) throw DimensionError("frame count must be at least 1");
  Tensor j(Shape{t_a});
  for (std::size_t i = 0; i < t_a; ++i) j[i] = static_cast<Real>(i);
  return j;
}

}  // namespace

Tensor encode_phoneme_positions(const Tensor& s, const PositionCodec& codec) {
  return encode(s, codec);
}

Tensor encode_frame_positions(std::size_t t_a, const PositionCodec& codec) {
  return encode(frame_indices(t_a), codec);
}

Tensor attention_matrix(const Tensor& f, const Tensor& p) {
  return ops::matmul_nt(f, p);
}

Tensor gaussian_attention_matrix(const Tensor& s, std::size_t t_a, double sigma) {
  if (!(sigma > 0)) {
    throw ConfigError("gaussian width must be positive, got " + std::to_string(sigma));
  }
  const Tensor d = ops::outer_sub(frame_indices(t_a), s);
  return ops::exp(ops::scale(ops::square(d), static_cast<Real>(-0.5 / (sigma * sigma))));
}

Tensor normalize_attention(const Tensor& a, Normalization mode, Real eps) {
  if (mode == Normalization::kSoftmax) return ops::softmax_rows(a);
  return ops::row_normalize(a, eps);
}

std::vector<std::size_t> hard_attention_indices(const Tensor& a) {
  if (a.rank() != 2) {
    throw DimensionError("hard_attention expects a matrix, got " +
                         shape_to_string(a.shape()));
  }
  std::vector<std::size_t> idx(a.rows());
  for (std::size_t j = 0; j < a.rows(); ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < a.cols(); ++i) {
      if (a.at(j, i) > a.at(j, best)) best = i;
    }
    idx[j] = best;
  }
  return idx;
}

Tensor hard_attention(const Tensor& a) {
  const auto idx = hard_attention_indices(a);
  Tensor out(a.shape());
  for (std::size_t j = 0; j < idx.size(); ++j) out.at(j, idx[j]) = 1;
  return out;
}

std::vector<double> attention_width_from_alignment(std::span<const double> r) {
  if (r.empty()) throw DimensionError("alignment widths must be non-empty");
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!(r[i] > 0)) {
      throw DomainError("alignment width r[" + std::to_string(i) + "] = " +
                        std::to_string(r[i]) + " is not positive");
    }
  }
  const std::size_t n = r.size();
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double prev = i == 0 ? r[0] : r[i - 1];
    const double next = i + 1 == n ? r[n - 1] : r[i + 1];
    w[i] = 0.25 * (prev + 2 * r[i] + next);
  }
  return w;
}

std::vector<std::size_t> brute_force_width(std::span<const std::size_t> argmax,
                                           std::size_t t_p) {
  std::vector<std::size_t> counts(t_p, 0);
  for (std::size_t i : argmax) {
    if (i >= t_p) {
      throw IndexError("argmax index " + std::to_string(i) + " outside [0, " +
                       std::to_string(t_p) + ")");
    }
    ++counts[i];
  }
  return counts;
}

std::vector<std::size_t> brute_force_width(const Tensor& one_hot) {
  return brute_force_width(hard_attention_indices(one_hot), one_hot.cols());
}

std::vector<double> heavy_tail_profile(const PositionCodec& codec,
                                       std::span<const double> offsets) {
  if (codec.config().kernel != Kernel::kSineCosine) {
    throw ConfigError("heavy_tail_profile needs the sine-cosine kernel");
  }
  const auto f = codec.frequency_values();
  std::vector<double> g(offsets.size());
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    double acc = 0;
    for (double fk : f) acc += std::cos(offsets[i] / fk);
    g[i] = acc;
  }
  return g;
}

Tensor attention_scores(const Tensor& r, std::size_t t_a,
                        const PositionCodec& codec,
                        const AttentionOptions& options) {
  check_widths(r.values());
  const Tensor s = options.fixed_positions ? fixed_positions(r.numel(), t_a)
                                           : compute_positions(r);
  if (codec.config().kernel == Kernel::kGaussian) {
    return gaussian_attention_matrix(s, t_a, codec.config().gaussian_sigma);
  }
  return attention_matrix(encode_frame_positions(t_a, codec),
                          encode_phoneme_positions(s, codec));
}

AlignmentState compute_alignment_state(std::span<const double> r,
                                       std::size_t t_a,
                                       const PositionCodec& codec,
                                       const AttentionOptions& options) {
  NoGradScope no_grad;
  AlignmentState st;
  st.r.assign(r.begin(), r.end());
  st.w = attention_width_from_alignment(r);
  Tensor rt(Shape{r.size()});
  for (std::size_t i = 0; i < r.size(); ++i) rt[i] = static_cast<Real>(r[i]);
  if (options.fixed_positions) {
    const Tensor s = fixed_positions(r.size(), t_a);
    st.s.assign(s.values().begin(), s.values().end());
  } else {
    st.s = compute_positions(r);
  }
  st.a = attention_scores(rt, t_a, codec, options);
  st.a_hat = normalize_attention(st.a, options.normalization);
  st.argmax = hard_attention_indices(st.a);
  st.a_tilde = hard_attention(st.a);
  return st;
}

void write_matrix_csv(const std::string& path, const Tensor& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << m.at(i, j);
    }
    out << '\n';
  }
  if (!out) throw IoError("short write to " + path);
}

Tensor read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::vector<Real> values;
  std::size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t n = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(static_cast<Real>(std::stod(cell, &used)));
      } catch (const std::exception&) {
        throw FormatError(path + ": bad number '" + cell + "' on row " +
                          std::to_string(rows + 1));
      }
      ++n;
    }
    if (rows == 0) cols = n;
    if (n != cols) {
      throw FormatError(path + ": row " + std::to_string(rows + 1) + " has " +
                        std::to_string(n) + " cells, expected " + std::to_string(cols));
    }
    ++rows;
  }
  if (rows == 0 || cols == 0) throw FormatError(path + ": empty matrix");
  return Tensor(Shape{rows, cols}, std::move(values));
}

void write_matrix_pgm(const std::string& path, const Tensor& m) {
  if (m.rank() != 2) throw DimensionError("PGM export needs a matrix");
  Real lo = m[0], hi = m[0];
  for (Real v : m.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double range = hi > lo ? static_cast<double>(hi - lo) : 1.0;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "P5\n" << m.cols() << ' ' << m.rows() << "\n255\n";
  for (Real v : m.values()) {
    const double x = (static_cast<double>(v) - lo) / range;
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255 * x))));
  }
  if (!out) throw IoError("short write to " + path);
}

}  // namespace fpets::align
