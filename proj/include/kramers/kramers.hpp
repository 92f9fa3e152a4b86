#pragma once

#include "kramers/errors.hpp"
#include "kramers/gaussian_reference.hpp"
#include "kramers/grid.hpp"
#include "kramers/inequalities.hpp"
#include "kramers/lattice_model.hpp"
#include "kramers/potentials.hpp"
#include "kramers/report_io.hpp"
#include "kramers/rng.hpp"
#include "kramers/sampling.hpp"
#include "kramers/spectral_solver.hpp"
#include "kramers/stats.hpp"
#include "kramers/verify.hpp"
