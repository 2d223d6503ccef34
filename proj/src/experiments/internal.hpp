#ifndef METACAUSAL_EXPERIMENTS_INTERNAL_HPP
#define METACAUSAL_EXPERIMENTS_INTERNAL_HPP

#include "metacausal/experiments.hpp"
#include "metacausal/meta.hpp"

namespace metacausal::experiments::detail {

void require(bool ok, const std::string& what);
numkit::OptimizerState make_optimizer(const std::string& kind, double lr);

/// Per-step rows of every episode, in the trace CSV layout (no profile column).
Table trace_table(const meta::MetaRun& run, const std::string& file);

}  // namespace metacausal::experiments::detail

#endif
