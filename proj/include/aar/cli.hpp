#ifndef AAR_CLI_HPP
#define AAR_CLI_HPP

#include "aar/config.hpp"
#include "aar/reranker.hpp"
#include "aar/synthetic_bench.hpp"
#include "aar/trainer.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace aar {

/// Every key a config file may carry.
const std::vector<std::string>& known_config_keys();

SyntheticSpec synthetic_spec_from(const Config& c);
TrainConfig train_config_from(const Config& c);
RerankConfig rerank_config_from(const Config& c);

/// Each command reads its inputs from the paths in `c`, writes its outputs
/// atomically and returns a short JSON summary.
nlohmann::json cmd_synth(const Config& c);
nlohmann::json cmd_pairs(const Config& c);
nlohmann::json cmd_train(const Config& c);
nlohmann::json cmd_rerank(const Config& c);
nlohmann::json cmd_eval(const Config& c);
nlohmann::json cmd_sweep(const Config& c);
nlohmann::json cmd_bench(const Config& c);

/// `aar <command> [--config FILE] [--set key=value]...`. Failures print one
/// line "error: <kind>: <message>" to `err` and return nonzero.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace aar

#endif  // AAR_CLI_HPP
