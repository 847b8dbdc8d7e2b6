#pragma once

// Umbrella header for the core library (no file I/O).

#include "viable/alignment.hpp"
#include "viable/attention.hpp"
#include "viable/errors.hpp"
#include "viable/exposure.hpp"
#include "viable/fair_generator.hpp"
#include "viable/scan.hpp"
#include "viable/version.hpp"
