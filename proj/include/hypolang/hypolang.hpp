#ifndef HYPOLANG_HYPOLANG_HPP
#define HYPOLANG_HYPOLANG_HPP

#include "hypolang/types.hpp"
#include "hypolang/spectral.hpp"
#include "hypolang/potential.hpp"
#include "hypolang/model.hpp"
#include "hypolang/rng.hpp"
#include "hypolang/stats.hpp"
#include "hypolang/parallel.hpp"
#include "hypolang/gauss_hermite.hpp"
#include "hypolang/generator.hpp"
#include "hypolang/measures.hpp"
#include "hypolang/dynamics.hpp"
#include "hypolang/certifier.hpp"
#include "hypolang/experiments.hpp"
#include "hypolang/verify.hpp"
#include "hypolang/config.hpp"

#endif  // HYPOLANG_HYPOLANG_HPP
