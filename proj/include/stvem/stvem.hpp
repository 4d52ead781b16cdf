// Umbrella header.

#pragma once

#include "experiments.hpp"
