// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "trajattn/errors.hpp"
#include "trajattn/numerics/linalg.hpp"
#include "trajattn/numerics/random.hpp"
#include "trajattn/numerics/tape.hpp"
#include "trajattn/numerics/grad_check.hpp"
#include "trajattn/data/trajectory.hpp"
#include "trajattn/data/neighborhood.hpp"
#include "trajattn/data/labels.hpp"
#include "trajattn/data/synth.hpp"
#include "trajattn/clustering/dbscan.hpp"
#include "trajattn/clustering/trajectory_clustering.hpp"
#include "trajattn/model/hardwired.hpp"
#include "trajattn/model/attention_model.hpp"
#include "trajattn/training/trainer.hpp"
#include "trajattn/training/persistence.hpp"
#include "trajattn/evaluation/metrics.hpp"
#include "trajattn/evaluation/report.hpp"
#include "trajattn/evaluation/plot.hpp"
#include "trajattn/anomaly/anomaly.hpp"
#include "trajattn/anomaly/pipeline.hpp"
#include "trajattn/cli/run_config.hpp"
