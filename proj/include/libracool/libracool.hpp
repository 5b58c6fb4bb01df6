#pragma once

#include "libracool/analysis.hpp"
#include "libracool/detection.hpp"
#include "libracool/dynamics.hpp"
#include "libracool/error.hpp"
#include "libracool/experiments.hpp"
#include "libracool/feedback.hpp"
#include "libracool/parallel.hpp"
#include "libracool/physics.hpp"
#include "libracool/rng.hpp"
#include "libracool/timetrace.hpp"
