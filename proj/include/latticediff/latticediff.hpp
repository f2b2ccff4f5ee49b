#pragma once

#include "error.hpp"
#include "quadrature.hpp"
#include "bath.hpp"
#include "model.hpp"
#include "reservoir.hpp"
#include "generator.hpp"
#include "spectral.hpp"
#include "parallel.hpp"
#include "kmc.hpp"
#include "expression.hpp"
#include "diagrams.hpp"
#include "io.hpp"
#include "cli.hpp"
