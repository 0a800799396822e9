#pragma once

#include "actlang/behavior_metrics.hpp"
#include "actlang/bpe.hpp"
#include "actlang/classifier/cross_validation.hpp"
#include "actlang/errors.hpp"
#include "actlang/events.hpp"
#include "actlang/io.hpp"
#include "actlang/synth.hpp"
#include "actlang/tokenizer.hpp"
#include "actlang/version.hpp"
#include "actlang/vocab_analytics.hpp"
