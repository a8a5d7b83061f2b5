#pragma once

#include "mixchoice/cli.hpp"
#include "mixchoice/design_model.hpp"
#include "mixchoice/errors.hpp"
#include "mixchoice/evaluation.hpp"
#include "mixchoice/io.hpp"
#include "mixchoice/mnl.hpp"
#include "mixchoice/optimality.hpp"
#include "mixchoice/optimizer.hpp"
#include "mixchoice/prior.hpp"
