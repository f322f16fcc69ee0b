#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace oneshot {

namespace detail {
inline void format_into(std::ostringstream&) {}
template <typename T, typename... Rest>
void format_into(std::ostringstream& os, const T& v, const Rest&... rest) {
  os << v;
  format_into(os, rest...);
}
}  // namespace detail

template <typename... Parts>
std::string strcat_msg(const Parts&... parts) {
  std::ostringstream os;
  detail::format_into(os, parts...);
  return os.str();
}

template <typename... Parts>
void check(bool ok, const Parts&... parts) {
  if (!ok) throw std::invalid_argument(strcat_msg(parts...));
}

}  // namespace oneshot
