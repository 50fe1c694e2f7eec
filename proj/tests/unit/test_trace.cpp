#include <gtest/gtest.h>

#include <sstream>

#include "uot/error.hpp"
#include "uot/trace.hpp"

namespace uot {
namespace {

TEST(Trace, CsvHeaderAndRows) {
  Trace t(false);
  t.add(0, 1.5, 2.0, 1.0, 0.25, false);
  t.add(3, 1.0, 0.5, 0.25, 0.5, true);
  std::ostringstream os;
  t.write_csv(os);
  EXPECT_EQ(os.str(),
            "iter,objective,grad_norm_2,grad_norm_inf,step_or_L,restart_flag,wall_clock_ms\n"
            "0,1.5,2,1,0.25,0,0\n"
            "3,1,0.5,0.25,0.5,1,0\n");
}

TEST(Trace, IterationsMustNotDecrease) {
  Trace t;
  t.add(5, 0, 0, 0, 0, false);
  EXPECT_THROW(t.add(4, 0, 0, 0, 0, false), Error);
}

TEST(Trace, ClockIsNondecreasing) {
  Trace t;
  for (std::size_t k = 0; k < 100; ++k) t.add(k, 0, 0, 0, 0, false);
  for (std::size_t k = 1; k < t.size(); ++k) {
    EXPECT_GE(t.records()[k].wall_clock_ms, t.records()[k - 1].wall_clock_ms);
  }
}

}  // namespace
}  // namespace uot
