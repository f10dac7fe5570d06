#pragma once

#include <string>

// Eigen must come first: resolv.h, pulled in by httplib, defines a `_res` macro.
#include "herdcast/app/service.hpp"

#include <httplib.h>

namespace herdcast::app {

inline void reply(httplib::Response& res, const Response& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

inline Query query_of(const httplib::Request& req) {
  Query q;
  for (const auto& [k, v] : req.params) q.emplace(k, v);
  return q;
}

// Routes every request through Service::handle; the service must outlive the server.
inline void mount(httplib::Server& server, const Service& service) {
  const auto route = [&service](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.handle(req.method, req.path, query_of(req), req.body));
  };
  server.Get(".*", route);
  server.Post(".*", route);
  server.Put(".*", route);
  server.Delete(".*", route);
}

}  // namespace herdcast::app
