#pragma once

#include <cstdint>

#include "pmadapt/adaptation.hpp"
#include "pmadapt/mcmc_core.hpp"
#include "pmadapt/model.hpp"
#include "pmadapt/rng.hpp"
#include "pmadapt/trace.hpp"

namespace pmadapt {

// Every sampler splits its run stream into fixed-purpose substreams so that
// the chain's draws do not depend on what the controller does.
namespace stream_key {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kChain = 2;
inline constexpr std::uint64_t kController = 3;
}  // namespace stream_key

/// Metropolis-Hastings with the model's exact likelihood.
ChainRun run_mh(const Model& model, const ParamVector& theta0, const ProposalSpec& prop,
                std::int64_t iterations, TraceSink& sink, const RngStream& rng);

/// Pseudo-marginal MH with a constant N. A positive `monitor_epoch_size`
/// additionally records recycled estimates and per-epoch sigma_hat.
ChainRun run_pm(const Model& model, const ParamVector& theta0, const ProposalSpec& prop, int n,
                std::int64_t iterations, TraceSink& sink, const RngStream& rng,
                int monitor_epoch_size = 0);

/// Adaptive pseudo-marginal MH starting from config.n_init particles.
ChainRun run_apm(const Model& model, const ParamVector& theta0, const ProposalSpec& prop,
                 const AdaptConfig& config, std::int64_t iterations, TraceSink& sink,
                 const RngStream& rng);

}  // namespace pmadapt
