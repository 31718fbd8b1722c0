// SPDX-License-Identifier: Apache-2.0
#include "perfwatch/command.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cctype>
#include <cerrno>
#include <cstring>
#include <optional>

#include "perfwatch/error.hpp"

namespace perfwatch {

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::optional<std::string> current;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (current) tokens.push_back(std::move(*current));
      current.reset();
      ++i;
    } else if (c == '\'') {
      auto end = text.find('\'', i + 1);
      if (end == std::string_view::npos) throw Error(ErrorCode::kBadRequest, "unterminated ' in command");
      if (!current) current.emplace();
      current->append(text.substr(i + 1, end - i - 1));
      i = end + 1;
    } else if (c == '"') {
      if (!current) current.emplace();
      ++i;
      bool closed = false;
      while (i < text.size()) {
        char d = text[i];
        if (d == '"') {
          closed = true;
          ++i;
          break;
        }
        if (d == '\\' && i + 1 < text.size()) {
          current->push_back(text[i + 1]);
          i += 2;
          continue;
        }
        current->push_back(d);
        ++i;
      }
      if (!closed) throw Error(ErrorCode::kBadRequest, "unterminated \" in command");
    } else {
      if (!current) current.emplace();
      current->push_back(c);
      ++i;
    }
  }
  if (current) tokens.push_back(std::move(*current));
  return tokens;
}

}  // namespace

std::string expand_placeholders(std::string_view tmpl, const Bindings& bindings) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{' && i + 1 < tmpl.size() && is_ident_start(tmpl[i + 1])) {
      std::size_t j = i + 1;
      while (j < tmpl.size() && is_ident(tmpl[j])) ++j;
      if (j < tmpl.size() && tmpl[j] == '}') {
        std::string_view name = tmpl.substr(i + 1, j - i - 1);
        auto it = bindings.find(name);
        if (it == bindings.end()) {
          throw Error(ErrorCode::kUnknownPlaceholder, "unknown placeholder {" + std::string(name) + "}");
        }
        out += it->second;
        i = j + 1;
        continue;
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

std::vector<std::string> render_command(std::string_view tmpl, const Bindings& bindings) {
  if (tmpl.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw Error(ErrorCode::kEmptyCommand, "empty command template");
  }
  auto argv = tokenize(expand_placeholders(tmpl, bindings));
  if (argv.empty()) throw Error(ErrorCode::kEmptyCommand, "command template renders to nothing");
  return argv;
}

ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& options) {
  if (argv.empty()) throw Error(ErrorCode::kEmptyCommand, "empty argv");

  std::vector<char*> cargv;
  cargv.reserve(argv.size() + 1);
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);
  std::string workdir = options.workdir.string();

  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) throw Error(ErrorCode::kIo, std::string("pipe: ") + std::strerror(errno));

  auto start = std::chrono::steady_clock::now();
  pid_t pid = ::fork();
  if (pid < 0) {
    ::close(fds[0]);
    ::close(fds[1]);
    throw Error(ErrorCode::kIo, std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    ::dup2(fds[1], STDOUT_FILENO);
    ::dup2(fds[1], STDERR_FILENO);
    int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
    if (!workdir.empty() && ::chdir(workdir.c_str()) != 0) {
      static constexpr char kMsg[] = "cannot enter working directory\n";
      [[maybe_unused]] auto n = ::write(STDERR_FILENO, kMsg, sizeof(kMsg) - 1);
      ::_exit(127);
    }
    ::execvp(cargv[0], cargv.data());
    static constexpr char kMsg[] = "cannot execute command\n";
    [[maybe_unused]] auto n = ::write(STDERR_FILENO, kMsg, sizeof(kMsg) - 1);
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  ::close(fds[1]);

  ProcessResult result;
  const bool limited = options.timeout.count() > 0;
  const auto deadline = start + options.timeout;
  char buf[4096];
  bool open = true;
  while (open) {
    int wait_ms = -1;
    if (limited) {
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) {
        result.timed_out = true;
        break;
      }
      wait_ms = static_cast<int>(left.count());
    }
    pollfd pfd{fds[0], POLLIN, 0};
    int rc = ::poll(&pfd, 1, wait_ms);
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (rc == 0) continue;
    ssize_t n = ::read(fds[0], buf, sizeof(buf));
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      open = false;
      break;
    }
    result.output.append(buf, static_cast<std::size_t>(n));
    if (result.output.size() > options.max_output) {
      result.output.erase(0, result.output.size() - options.max_output);
    }
  }
  ::close(fds[0]);

  if (result.timed_out) ::kill(-pid, SIGKILL);
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }

  if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    result.exit_code = 128 + WTERMSIG(status);
  }
  result.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
  return result;
}

}  // namespace perfwatch
