#include "facedose/service.hpp"

#include "facedose/error.hpp"

#include <httplib.h>

#include <cstdlib>

namespace facedose::service {

Options Options::from_env()
{
    Options o;
    if (const char* v = std::getenv("FACEDOSE_DATA_DIR"); v && *v) o.data_dir = v;
    if (const char* v = std::getenv("FACEDOSE_MODEL"); v && *v) o.model_path = v;
    if (const char* v = std::getenv("FACEDOSE_WORLD"); v && *v) o.world_path = v;
    if (const char* v = std::getenv("FACEDOSE_BIND"); v && *v) {
        const std::string bind = v;
        const std::size_t colon = bind.rfind(':');
        if (colon == std::string::npos) throw Error(Errc::invalid_config, "expected host:port", "FACEDOSE_BIND");
        o.host = bind.substr(0, colon);
        char* end = nullptr;
        const long port = std::strtol(bind.c_str() + colon + 1, &end, 10);
        if (*end != '\0' || port < 0 || port > 65535) {
            throw Error(Errc::invalid_config, "port must be an integer in [0, 65535]", "FACEDOSE_BIND");
        }
        o.port = static_cast<int>(port);
    }
    return o;
}

struct HttpServer::Impl
{
    httplib::Server server;
};

HttpServer::HttpServer(PlanningService& service) : impl_(std::make_unique<Impl>())
{
    // Every request goes through the dispatcher; httplib only moves bytes.
    // Regular handlers, not the pre-routing hook: the body is read by then.
    const auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
        Request r;
        r.method = req.method;
        r.path = req.path;
        const std::size_t q = req.target.find('?');
        if (q != std::string::npos) r.query = req.target.substr(q + 1);
        r.body = req.body;
        const Response out = service.handle(r);
        res.status = out.status;
        res.set_content(out.body, "application/json");
    };
    auto& s = impl_->server;
    s.Get(".*", forward);
    s.Post(".*", forward);
    s.Put(".*", forward);
    s.Patch(".*", forward);
    s.Delete(".*", forward);
}

HttpServer::~HttpServer()
{
    impl_->server.stop();
}

int HttpServer::bind(const std::string& host, int port)
{
    if (port == 0) {
        const int bound = impl_->server.bind_to_any_port(host);
        if (bound < 0) throw Error(Errc::io_error, "cannot bind", host);
        return bound;
    }
    if (!impl_->server.bind_to_port(host, port)) {
        throw Error(Errc::io_error, "cannot bind", host + ":" + std::to_string(port));
    }
    return port;
}

bool HttpServer::listen()
{
    return impl_->server.listen_after_bind();
}

void HttpServer::stop()
{
    impl_->server.stop();
}

} // namespace facedose::service
