#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "rcsnet/log.hpp"

int main(int argc, char** argv) {
  rcsnet::log::set_sink([](rcsnet::log::Level, const std::string&) {});
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
