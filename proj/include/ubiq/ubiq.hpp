#pragma once

#include "ubiq/bsde.hpp"
#include "ubiq/cli.hpp"
#include "ubiq/config.hpp"
#include "ubiq/equilibrium.hpp"
#include "ubiq/errors.hpp"
#include "ubiq/ito.hpp"
#include "ubiq/labor.hpp"
#include "ubiq/model.hpp"
#include "ubiq/parallel.hpp"
#include "ubiq/table.hpp"
#include "ubiq/welfare.hpp"
