#pragma once

#include "ndpa/closed_form.hpp"
#include "ndpa/config_io.hpp"
#include "ndpa/core_model.hpp"
#include "ndpa/error.hpp"
#include "ndpa/figures.hpp"
#include "ndpa/fluctuation.hpp"
#include "ndpa/langevin.hpp"
#include "ndpa/philox.hpp"
#include "ndpa/presets.hpp"
#include "ndpa/serialize.hpp"
#include "ndpa/steady_state.hpp"
#include "ndpa/sweep.hpp"
#include "ndpa/validation.hpp"
#include "ndpa/welch.hpp"
