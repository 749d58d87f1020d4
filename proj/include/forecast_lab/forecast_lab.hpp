#pragma once

#include "analysis.hpp"
#include "bits.hpp"
#include "errors.hpp"
#include "io.hpp"
#include "processes.hpp"
#include "recurrence.hpp"
#include "verify.hpp"
