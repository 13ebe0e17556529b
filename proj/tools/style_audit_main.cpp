#include "style_audit/harness.hpp"

int main(int argc, char** argv) { return style_audit::main_entry(argc, argv); }
