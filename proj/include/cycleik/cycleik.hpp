#pragma once

#include "cycleik/chain.hpp"
#include "cycleik/convex_hull.hpp"
#include "cycleik/dataset.hpp"
#include "cycleik/evalbench.hpp"
#include "cycleik/kinematics.hpp"
#include "cycleik/neural.hpp"
#include "cycleik/solvers.hpp"
#include "cycleik/training.hpp"
