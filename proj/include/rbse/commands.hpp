#pragma once

#include <iosfwd>

#include "rbse/classifier.hpp"
#include "rbse/config.hpp"
#include "rbse/gradcheck.hpp"
#include "rbse/model_io.hpp"

namespace rbse {

// Command layer: each function reads its settings from the resolved key=value
// config, validates every field up front (one ValidationError listing all
// problems), writes its artifacts under `out.dir`, and narrates progress to
// `log`. Every run directory receives a frozen canonical copy of the config
// that was actually used (config.cfg), whose SHA-256 becomes the model
// provenance hash, plus a run.json sidecar carrying the seed and wall time;
// primary outputs contain nothing non-deterministic.
//
// Shared keys: out.dir, seed, threads. Dataset keys: data.source
// (synthetic|idx|cache), data.shape, data.n, data.noise, data.images,
// data.labels, data.test_images, data.test_labels, data.cache,
// data.binarize, data.dir (defaults to $RBSE_DATA_DIR, then "data";
// relative dataset paths are tried as given, then under this root).

// Trains on the configured dataset, writes model.json + history.csv.
ModelFile cmd_train_rbm(const KvConfig& cfg, std::ostream& log);
ModelFile cmd_train_rbse(const KvConfig& cfg, std::ostream& log);

// Runs the oracle sweep; writes report.json when out.dir is set. The caller
// decides the exit status from report.pass.
GradCheckReport cmd_gradcheck(const KvConfig& cfg, std::ostream& log);

// Trains an RBM and an RBSE on a synthetic shape and emits the four plot
// CSVs (roundtrip, clouds, attraction, fewpoint) plus attraction.json.
void cmd_synthetic_demo(const KvConfig& cfg, std::ostream& log);

// Repeated one-shot comparison of the four pipelines on a labeled pool;
// writes results.csv and results.json.
OneShotResult cmd_oneshot(const KvConfig& cfg, std::ostream& log);

// Renders each hidden unit's weight column as a grayscale tile grid
// (filters.pgm), plus probabilities.pgm for Bernoulli ensembles.
void cmd_inspect(const KvConfig& cfg, std::ostream& log);

// Dumps representations for the rows of input.csv as representations.csv.
void cmd_represent(const KvConfig& cfg, std::ostream& log);

}  // namespace rbse
