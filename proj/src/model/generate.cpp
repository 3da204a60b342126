#include "radis/model/generate.hpp"

#include <algorithm>
#include <cmath>

#include "radis/util/error.hpp"
#include "radis/util/rng.hpp"

namespace radis::model {

template <typename T>
int argmax(const RowVector<T>& row) {
  int best = 0;
  for (Eigen::Index j = 1; j < row.size(); ++j) {
    if (row(j) > row(best)) best = static_cast<int>(j);
  }
  return best;
}

template <typename T>
std::vector<int> generate(const Transformer<T>& model, std::span<const int> prefix,
                          const DecodeConfig& decode) {
  decode.validate();
  const int max_len = model.config().max_seq_len;
  if (prefix.empty()) throw DataError("generate: empty prefix");
  if (static_cast<int>(prefix.size()) >= max_len) {
    throw DataError("generate: prefix length " + std::to_string(prefix.size()) +
                    " must be below max_seq_len " + std::to_string(max_len));
  }
  KvCache<T> cache(model);
  RowVector<T> logits;
  for (int t : prefix) logits = cache.step(t);

  Rng rng(decode.seed);
  std::vector<int> out;
  for (;;) {
    int next;
    if (decode.mode == DecodeConfig::Mode::kGreedy) {
      next = argmax(logits);
    } else {
      const double inv_t = 1.0 / decode.temperature;
      const double mx = static_cast<double>(logits.maxCoeff());
      std::vector<double> w(logits.size());
      double sum = 0.0;
      for (Eigen::Index j = 0; j < logits.size(); ++j) {
        w[j] = std::exp((static_cast<double>(logits(j)) - mx) * inv_t);
        sum += w[j];
      }
      double u = rng.uniform() * sum;
      next = static_cast<int>(w.size()) - 1;
      for (size_t j = 0; j < w.size(); ++j) {
        if (u < w[j]) {
          next = static_cast<int>(j);
          break;
        }
        u -= w[j];
      }
    }
    out.push_back(next);
    const bool stop = std::find(decode.stop_tokens.begin(), decode.stop_tokens.end(), next) !=
                      decode.stop_tokens.end();
    if (stop || static_cast<int>(out.size()) >= decode.max_new_tokens ||
        cache.length() + 1 >= max_len) {
      break;
    }
    logits = cache.step(next);
  }
  return out;
}

template int argmax(const RowVector<float>&);
template int argmax(const RowVector<double>&);
template std::vector<int> generate(const Transformer<float>&, std::span<const int>,
                                   const DecodeConfig&);
template std::vector<int> generate(const Transformer<double>&, std::span<const int>,
                                   const DecodeConfig&);

}  // namespace radis::model
