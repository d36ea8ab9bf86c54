#ifndef DARKSQUEEZE_DARKSQUEEZE_HPP
#define DARKSQUEEZE_DARKSQUEEZE_HPP

#include "darksqueeze/analysis.hpp"
#include "darksqueeze/cli.hpp"
#include "darksqueeze/core.hpp"
#include "darksqueeze/dynamics.hpp"
#include "darksqueeze/model.hpp"
#include "darksqueeze/oracle.hpp"
#include "darksqueeze/runconfig.hpp"

#endif  // DARKSQUEEZE_DARKSQUEEZE_HPP
