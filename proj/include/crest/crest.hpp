#pragma once

#include "crest/artifacts.hpp"
#include "crest/calibration.hpp"
#include "crest/criterion.hpp"
#include "crest/dataset.hpp"
#include "crest/embedding.hpp"
#include "crest/ensemble.hpp"
#include "crest/error.hpp"
#include "crest/eval.hpp"
#include "crest/experiment.hpp"
#include "crest/index.hpp"
#include "crest/observation.hpp"
#include "crest/pipeline.hpp"
#include "crest/remote.hpp"
#include "crest/run.hpp"
#include "crest/scorers.hpp"
#include "crest/service.hpp"
#include "crest/synth.hpp"
#include "crest/template_spec.hpp"
#include "crest/text.hpp"
#include "crest/train.hpp"
#include "crest/trouble_report.hpp"
