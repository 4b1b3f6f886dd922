#include "boulder/env.hpp"

namespace boulder::env {

Curriculum::Curriculum(const CurriculumConfig& cfg)
    : level_(cfg.pinned_level >= 0 ? cfg.pinned_level : cfg.start_level),
      pinned_(cfg.pinned_level >= 0),
      threshold_(cfg.threshold),
      window_(static_cast<std::size_t>(cfg.window), 0) {
  if (cfg.window < 1) throw DomainError("curriculum: window must be positive");
  if (level_ < 0 || level_ >= kNumLevels) throw DomainError("curriculum: level out of range");
}

bool Curriculum::record(bool success) {
  if (count_ == window_.size()) {
    successes_ -= window_[head_];
  } else {
    ++count_;
  }
  window_[head_] = success ? 1 : 0;
  successes_ += window_[head_];
  head_ = (head_ + 1) % window_.size();

  if (pinned_ || level_ >= kNumLevels - 1 || count_ < window_.size()) return false;
  // Advancement needs strictly more than the threshold.
  if (static_cast<double>(successes_) <= threshold_ * static_cast<double>(window_.size())) return false;
  ++level_;
  head_ = count_ = successes_ = 0;
  std::fill(window_.begin(), window_.end(), 0);
  return true;
}

double Curriculum::success_rate() const {
  return count_ == 0 ? 0.0 : static_cast<double>(successes_) / static_cast<double>(count_);
}

}  // namespace boulder::env
