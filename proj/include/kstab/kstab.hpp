#pragma once

#include "kstab/batch.hpp"
#include "kstab/ding.hpp"
#include "kstab/errors.hpp"
#include "kstab/hull.hpp"
#include "kstab/integrate.hpp"
#include "kstab/json_io.hpp"
#include "kstab/linalg.hpp"
#include "kstab/palp.hpp"
#include "kstab/pl_function.hpp"
#include "kstab/polytope.hpp"
#include "kstab/quadrature.hpp"
#include "kstab/rational.hpp"
#include "kstab/test_configuration.hpp"
#include "kstab/toric_fano.hpp"
