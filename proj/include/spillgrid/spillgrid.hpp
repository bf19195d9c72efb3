#pragma once

// Umbrella header for the spillgrid engine.

#include "spillgrid/address.hpp"
#include "spillgrid/ast.hpp"
#include "spillgrid/cli.hpp"
#include "spillgrid/date.hpp"
#include "spillgrid/engine.hpp"
#include "spillgrid/functions.hpp"
#include "spillgrid/io.hpp"
#include "spillgrid/lexer.hpp"
#include "spillgrid/parser.hpp"
#include "spillgrid/value.hpp"
#include "spillgrid/workbook.hpp"
