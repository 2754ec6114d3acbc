#pragma once

#include "kbz/benchmark.hpp"
#include "kbz/convex.hpp"
#include "kbz/dense_matrix.hpp"
#include "kbz/mnist.hpp"
#include "kbz/partition.hpp"
#include "kbz/pgm.hpp"
#include "kbz/problem.hpp"
#include "kbz/random.hpp"
#include "kbz/solver.hpp"
#include "kbz/spectral.hpp"
