#include <pybind11/pybind11.h>
PYBIND11_MODULE(_rollopt, m) { m.doc() = "stub"; }
