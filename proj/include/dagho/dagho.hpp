#pragma once

#include "dagho/model.hpp"
#include "dagho/stationary.hpp"
#include "dagho/dynamics.hpp"
#include "dagho/homotopy.hpp"
#include "dagho/io.hpp"
