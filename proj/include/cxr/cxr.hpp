#pragma once

// One-shot vs two-stage cascade X-ray classification pipelines: data
// ingestion and stratified splitting, a small trainable CNN and transfer
// heads, counting-exact metrics, cascade composition, experiment harness and
// figure rendering.

#include "cxr/cascade.hpp"
#include "cxr/classifier.hpp"
#include "cxr/csv.hpp"
#include "cxr/dataio.hpp"
#include "cxr/errors.hpp"
#include "cxr/features.hpp"
#include "cxr/harness.hpp"
#include "cxr/image.hpp"
#include "cxr/manifest.hpp"
#include "cxr/metrics.hpp"
#include "cxr/modelspec.hpp"
#include "cxr/nn.hpp"
#include "cxr/report.hpp"
#include "cxr/rng.hpp"
#include "cxr/schema.hpp"
#include "cxr/stats.hpp"
#include "cxr/synth.hpp"
#include "cxr/train.hpp"
