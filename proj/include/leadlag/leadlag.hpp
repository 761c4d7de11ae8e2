#pragma once

#include "leadlag/chain.hpp"
#include "leadlag/corpus.hpp"
#include "leadlag/diagnostics.hpp"
#include "leadlag/error.hpp"
#include "leadlag/evaluation.hpp"
#include "leadlag/jdtm.hpp"
#include "leadlag/kalman.hpp"
#include "leadlag/model_io.hpp"
#include "leadlag/numeric.hpp"
#include "leadlag/parallel.hpp"
#include "leadlag/random.hpp"
#include "leadlag/report.hpp"
#include "leadlag/synthgen.hpp"
