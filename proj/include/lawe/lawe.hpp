#ifndef LAWE_LAWE_HPP
#define LAWE_LAWE_HPP

#include "lawe/discrete.hpp"
#include "lawe/error.hpp"
#include "lawe/model.hpp"
#include "lawe/polytrans.hpp"
#include "lawe/ppmodes.hpp"
#include "lawe/slform.hpp"
#include "lawe/spectra.hpp"

#endif
