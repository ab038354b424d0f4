#pragma once

#include "davydov_nh/ansatz.hpp"
#include "davydov_nh/errors.hpp"
#include "davydov_nh/exact.hpp"
#include "davydov_nh/models.hpp"
#include "davydov_nh/operator.hpp"
#include "davydov_nh/presets.hpp"
#include "davydov_nh/tdvp.hpp"
#include "davydov_nh/trajectory.hpp"
#include "davydov_nh/version.hpp"
