#pragma once

#include "chartfolio/backtest.hpp"
#include "chartfolio/cae/arch.hpp"
#include "chartfolio/cae/checkpoint.hpp"
#include "chartfolio/cae/layers.hpp"
#include "chartfolio/cae/network.hpp"
#include "chartfolio/cae/trainer.hpp"
#include "chartfolio/chart_render.hpp"
#include "chartfolio/config.hpp"
#include "chartfolio/csv.hpp"
#include "chartfolio/date.hpp"
#include "chartfolio/embedding.hpp"
#include "chartfolio/error.hpp"
#include "chartfolio/graph_cluster.hpp"
#include "chartfolio/hash.hpp"
#include "chartfolio/market_data.hpp"
#include "chartfolio/png_io.hpp"
#include "chartfolio/portfolio.hpp"
