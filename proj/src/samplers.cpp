#include "pmadapt/samplers.hpp"

#include <memory>

namespace pmadapt {

namespace {

ChainRun drive(const Model& model, const ParamVector& theta0, const ProposalSpec& prop,
               Controller& controller, std::int64_t iterations, TraceSink& sink,
               const RngStream& rng) {
  RngStream init_rng = rng.substream(stream_key::kInit);
  RngStream chain_rng = rng.substream(stream_key::kChain);
  const ChainState init = initial_state(model, theta0, controller.particles(), init_rng);
  return run_chain(init, model, prop, controller, iterations, sink, chain_rng);
}

}  // namespace

ChainRun run_mh(const Model& model, const ParamVector& theta0, const ProposalSpec& prop,
                std::int64_t iterations, TraceSink& sink, const RngStream& rng) {
  const ExactLikelihoodModel exact(std::shared_ptr<const Model>(&model, [](const Model*) {}));
  FixedController controller(1);
  return drive(exact, theta0, prop, controller, iterations, sink, rng);
}

ChainRun run_pm(const Model& model, const ParamVector& theta0, const ProposalSpec& prop, int n,
                std::int64_t iterations, TraceSink& sink, const RngStream& rng,
                int monitor_epoch_size) {
  if (monitor_epoch_size > 0) {
    FixedController controller(n, theta0, monitor_epoch_size);
    return drive(model, theta0, prop, controller, iterations, sink, rng);
  }
  FixedController controller(n);
  return drive(model, theta0, prop, controller, iterations, sink, rng);
}

ChainRun run_apm(const Model& model, const ParamVector& theta0, const ProposalSpec& prop,
                 const AdaptConfig& config, std::int64_t iterations, TraceSink& sink,
                 const RngStream& rng) {
  ApmController controller(config, theta0, rng.substream(stream_key::kController));
  return drive(model, theta0, prop, controller, iterations, sink, rng);
}

}  // namespace pmadapt
