#pragma once

namespace sqfit {

/// Sets the library log level from SQFIT_LOG (error, warn, info, debug;
/// default warn). Safe to call more than once.
void init_logging();

}  // namespace sqfit
