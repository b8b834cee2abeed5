#pragma once

#include "colearn/bench.hpp"
#include "colearn/core_data.hpp"
#include "colearn/distance.hpp"
#include "colearn/error.hpp"
#include "colearn/forest.hpp"
#include "colearn/learners.hpp"
#include "colearn/simgen.hpp"
