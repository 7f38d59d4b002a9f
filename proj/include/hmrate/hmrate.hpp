#pragma once

#include "hmrate/channel.hpp"
#include "hmrate/constraint.hpp"
#include "hmrate/entropy.hpp"
#include "hmrate/eps_series.hpp"
#include "hmrate/error.hpp"
#include "hmrate/finite_difference.hpp"
#include "hmrate/linalg.hpp"
#include "hmrate/markov_input.hpp"
#include "hmrate/optimizer.hpp"
#include "hmrate/output_model.hpp"
#include "hmrate/parallel.hpp"
