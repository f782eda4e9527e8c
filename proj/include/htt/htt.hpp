#pragma once

#include "htt/answer.hpp"
#include "htt/backends/completion.hpp"
#include "htt/backends/prompted.hpp"
#include "htt/backends/reasoner.hpp"
#include "htt/backends/simulated.hpp"
#include "htt/common/assets.hpp"
#include "htt/common/error.hpp"
#include "htt/common/rng.hpp"
#include "htt/common/text.hpp"
#include "htt/grammar.hpp"
#include "htt/instance.hpp"
#include "htt/pipeline.hpp"
#include "htt/rule.hpp"
#include "htt/rulelib.hpp"
#include "htt/task.hpp"
#include "htt/tasks/arithmetic.hpp"
#include "htt/tasks/kinship.hpp"
#include "htt/tasks/listfn.hpp"
#include "htt/template.hpp"
#include "htt/trace.hpp"
#include "htt/config.hpp"
#include "htt/io.hpp"
