#pragma once

#include "capfair/core/norms.hpp"
#include "capfair/core/types.hpp"
#include "capfair/scm/builtin.hpp"
#include "capfair/scm/expression.hpp"
#include "capfair/scm/io.hpp"
#include "capfair/scm/scm.hpp"
#include "capfair/metric/fair_metric.hpp"
#include "capfair/model/classifier.hpp"
#include "capfair/model/io.hpp"
#include "capfair/train/objectives.hpp"
#include "capfair/train/pgd.hpp"
#include "capfair/train/trainer.hpp"
#include "capfair/audit/band.hpp"
#include "capfair/audit/metrics.hpp"
#include "capfair/audit/unfairness.hpp"
#include "capfair/data/bench.hpp"
#include "capfair/data/csv.hpp"
#include "capfair/data/dataset.hpp"
#include "capfair/data/generate.hpp"
#include "capfair/data/ingest.hpp"
#include "capfair/data/standardize.hpp"
