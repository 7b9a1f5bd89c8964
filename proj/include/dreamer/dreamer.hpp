#pragma once

#include "dreamer/assignment.hpp"
#include "dreamer/chat_client.hpp"
#include "dreamer/dataset.hpp"
#include "dreamer/matching.hpp"
#include "dreamer/metrics.hpp"
#include "dreamer/parallel.hpp"
#include "dreamer/planner.hpp"
#include "dreamer/prompts.hpp"
#include "dreamer/simulator.hpp"
#include "dreamer/sketch.hpp"
#include "dreamer/text_embedding.hpp"
#include "dreamer/utf8.hpp"
#include "dreamer/worldmodel.hpp"
