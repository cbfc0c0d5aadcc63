#include "dbmc/net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <iostream>
#include <map>

namespace dbmc {

namespace {

std::string err(const std::string& what) { return what + ": " + std::strerror(errno); }

void ignore_sigpipe() {
  static const bool once = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)once;
}

// Buffered newline-delimited connection.
struct Conn {
  int fd = -1;
  std::string in;
  std::string out;
  std::optional<ClientId> id;
  bool closing = false;

  // Returns false on EOF or error.
  bool read_some() {
    char buf[65536];
    for (;;) {
      ssize_t n = ::recv(fd, buf, sizeof buf, 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) return false;
      in.append(buf, static_cast<std::size_t>(n));
      return true;
    }
  }

  std::optional<std::string> next_line() {
    auto nl = in.find('\n');
    if (nl == std::string::npos) return std::nullopt;
    std::string line = in.substr(0, nl);
    in.erase(0, nl + 1);
    return line;
  }

  // Returns false on error.
  bool flush_some() {
    while (!out.empty()) {
      ssize_t n = ::send(fd, out.data(), out.size(), MSG_DONTWAIT | MSG_NOSIGNAL);
      if (n < 0 && errno == EINTR) continue;
      if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) return true;
      if (n < 0) return false;
      out.erase(0, static_cast<std::size_t>(n));
    }
    return true;
  }

  void write_all_blocking(const std::string& s) {
    std::size_t off = 0;
    while (off < s.size()) {
      ssize_t n = ::send(fd, s.data() + off, s.size() - off, MSG_NOSIGNAL);
      if (n < 0 && errno == EINTR) continue;
      if (n < 0) throw NetError(err("send"));
      off += static_cast<std::size_t>(n);
    }
  }
};

}  // namespace

Listener::Listener(std::uint16_t port, bool loopback_only) {
  ignore_sigpipe();
  fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd_ < 0) throw NetError(err("socket"));
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  addr.sin_addr.s_addr = htonl(loopback_only ? INADDR_LOOPBACK : INADDR_ANY);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
    ::close(fd_);
    throw NetError(err("bind"));
  }
  if (::listen(fd_, 64) < 0) {
    ::close(fd_);
    throw NetError(err("listen"));
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

Listener::~Listener() {
  if (fd_ >= 0) ::close(fd_);
}

ServeResult serve(Listener& listener, const ServeOptions& options) {
  ServerState state(options.config);
  std::map<int, Conn> conns;
  const auto start = std::chrono::steady_clock::now();
  std::optional<std::chrono::steady_clock::time_point> linger_until;

  auto route = [&](const std::vector<Outgoing>& outs) {
    for (const auto& o : outs)
      for (auto& [fd, c] : conns)
        if (c.id == o.to) c.out += encode(o.msg) + "\n";
  };
  auto drop = [&](Conn& c) {
    if (c.id) route(state.disconnect(*c.id));
    c.closing = true;
  };

  for (;;) {
    const auto now = std::chrono::steady_clock::now();
    if (options.timeout > 0 && !state.verdict() &&
        std::chrono::duration<double>(now - start).count() >= options.timeout) {
      if (options.verbose) std::cerr << "server: timeout\n";
      route(state.abort());
    }
    if (state.verdict()) {
      if (!linger_until) linger_until = now + std::chrono::seconds(2);
      bool pending = false;
      for (auto& [fd, c] : conns) pending = pending || !c.out.empty();
      if (!pending || now >= *linger_until) break;
    }

    std::vector<pollfd> fds;
    fds.push_back({listener.fd(), POLLIN, 0});
    for (auto& [fd, c] : conns) fds.push_back({fd, static_cast<short>(POLLIN | (c.out.empty() ? 0 : POLLOUT)), 0});
    int wait_ms = 200;
    int r = ::poll(fds.data(), fds.size(), wait_ms);
    if (r < 0 && errno != EINTR) throw NetError(err("poll"));
    if (r <= 0) continue;

    if (fds[0].revents & POLLIN) {
      int cfd = ::accept4(listener.fd(), nullptr, nullptr, SOCK_CLOEXEC);
      if (cfd >= 0) {
        int one = 1;
        ::setsockopt(cfd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        conns[cfd].fd = cfd;
      }
    }
    for (std::size_t i = 1; i < fds.size(); ++i) {
      Conn& c = conns.at(fds[i].fd);
      if (fds[i].revents & POLLOUT)
        if (!c.flush_some()) drop(c);
      if (!c.closing && (fds[i].revents & (POLLIN | POLLHUP | POLLERR))) {
        if (!c.read_some()) {
          drop(c);
          continue;
        }
        while (auto line = c.next_line()) {
          try {
            Message m = decode(*line);
            if (const auto* h = std::get_if<msg::Hello>(&m)) {
              if (c.id) throw ProtocolError("second HELLO on one connection");
              route(state.handle(h->id, m));
              c.id = h->id;
              continue;
            }
            if (!c.id) throw ProtocolError("message before HELLO");
            if (options.verbose) std::cerr << "server: " << *c.id << " -> " << message_type(m) << "\n";
            route(state.handle(*c.id, m));
          } catch (const ProtocolError& e) {
            std::cerr << "server: protocol error: " << e.what() << "\n";
            drop(c);
            break;
          }
        }
      }
    }
    for (auto it = conns.begin(); it != conns.end();) {
      if (it->second.closing) {
        it->second.flush_some();
        ::close(it->first);
        it = conns.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& [fd, c] : conns) ::close(fd);

  ServeResult res;
  res.verdict = *state.verdict();
  res.trace = state.trace();
  res.partitions_created = state.partitions_created();
  res.dispatch_count = state.dispatch_count();
  res.max_queue_depth = state.max_queue_depth();
  res.stats = state.stats();
  return res;
}

std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& s) {
  auto colon = s.rfind(':');
  if (colon == std::string::npos || colon == 0) throw NetError("endpoint must be HOST:PORT, got '" + s + "'");
  int port = 0;
  try {
    port = std::stoi(s.substr(colon + 1));
  } catch (const std::exception&) {
    throw NetError("invalid port in '" + s + "'");
  }
  if (port <= 0 || port > 65535) throw NetError("invalid port in '" + s + "'");
  return {s.substr(0, colon), static_cast<std::uint16_t>(port)};
}

void run_tcp_client(const CoreProgram& p, const ClientOptions& options, const std::string& host,
                    std::uint16_t port) {
  ignore_sigpipe();
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (int rc = ::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res); rc != 0)
    throw NetError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  Conn c;
  for (addrinfo* a = res; a; a = a->ai_next) {
    c.fd = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol);
    if (c.fd < 0) continue;
    if (::connect(c.fd, a->ai_addr, a->ai_addrlen) == 0) break;
    ::close(c.fd);
    c.fd = -1;
  }
  ::freeaddrinfo(res);
  if (c.fd < 0) throw NetError(err("cannot connect to " + host + ":" + std::to_string(port)));
  int one = 1;
  ::setsockopt(c.fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);

  struct Closer {
    int fd;
    ~Closer() { ::close(fd); }
  } closer{c.fd};

  ClientEngine engine(p, options, [&](const Message& m) { c.write_all_blocking(encode(m) + "\n"); });
  engine.start();
  while (!engine.done()) {
    pollfd pfd{c.fd, POLLIN, 0};
    int r = ::poll(&pfd, 1, engine.runnable() ? 0 : -1);
    if (r < 0 && errno != EINTR) throw NetError(err("poll"));
    if (r > 0) {
      if (!c.read_some()) return;
      while (auto line = c.next_line()) {
        engine.on_message(decode(*line));
        if (engine.done()) return;
      }
    }
    if (engine.runnable()) engine.step();
  }
}

}  // namespace dbmc
