#include "mmagent/code/sandbox.hpp"

#include "mmagent/text.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fcntl.h>
#include <linux/landlock.h>
#include <poll.h>
#include <signal.h>
#include <sys/prctl.h>
#include <sys/resource.h>
#include <sys/syscall.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>

extern char** environ;

namespace mmagent {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Report parsing and caps

std::optional<RunnerReport> parse_runner_report(std::string_view runner_stdout) {
    auto end = runner_stdout.size();
    while (end > 0 && is_ascii_space(runner_stdout[end - 1])) --end;
    if (end == 0) return std::nullopt;
    const auto line_start = runner_stdout.rfind('\n', end - 1);
    const auto line = runner_stdout.substr(line_start == std::string_view::npos ? 0 : line_start + 1,
                                           end - (line_start == std::string_view::npos ? 0 : line_start + 1));
    try {
        auto j = nlohmann::json::parse(line);
        if (!j.is_object() || !j.contains("ok") || !j["ok"].is_boolean()) return std::nullopt;
        RunnerReport r;
        r.ok = j["ok"].get<bool>();
        if (j.contains("stdout") && j["stdout"].is_string()) r.stdout_text = j["stdout"].get<std::string>();
        if (j.contains("stderr") && j["stderr"].is_string()) r.stderr_text = j["stderr"].get<std::string>();
        if (j.contains("duration_ms") && j["duration_ms"].is_number()) r.duration_ms = j["duration_ms"].get<std::int64_t>();
        return r;
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
}

std::string cap_output(std::string text, std::size_t cap) {
    if (text.size() <= cap) return text;
    const auto dropped = text.size() - cap;
    text.resize(cap);
    text += "\n[output truncated: " + std::to_string(dropped) + " bytes omitted]";
    return text;
}

// ---------------------------------------------------------------------------
// Landlock. The system header may predate network and scope rules, so the
// newer constants are spelled out here.

namespace {

constexpr std::uint64_t kFsWriteFile = 1ull << 1;
constexpr std::uint64_t kFsRemoveDir = 1ull << 4;
constexpr std::uint64_t kFsRemoveFile = 1ull << 5;
constexpr std::uint64_t kFsMakeChar = 1ull << 6;
constexpr std::uint64_t kFsMakeDir = 1ull << 7;
constexpr std::uint64_t kFsMakeReg = 1ull << 8;
constexpr std::uint64_t kFsMakeSock = 1ull << 9;
constexpr std::uint64_t kFsMakeFifo = 1ull << 10;
constexpr std::uint64_t kFsMakeBlock = 1ull << 11;
constexpr std::uint64_t kFsMakeSym = 1ull << 12;
constexpr std::uint64_t kFsRefer = 1ull << 13;     // ABI 2
constexpr std::uint64_t kFsTruncate = 1ull << 14;  // ABI 3
constexpr std::uint64_t kNetBindTcp = 1ull << 0;   // ABI 4
constexpr std::uint64_t kNetConnectTcp = 1ull << 1;
constexpr std::uint64_t kScopeAbstractUnix = 1ull << 0;  // ABI 6
constexpr std::uint64_t kScopeSignal = 1ull << 1;

struct RulesetAttr {
    std::uint64_t handled_access_fs;
    std::uint64_t handled_access_net;
    std::uint64_t scoped;
};

struct __attribute__((packed)) PathBeneathAttr {
    std::uint64_t allowed_access;
    std::int32_t parent_fd;
};

constexpr unsigned kRulePathBeneath = 1;

struct Fd {
    int fd = -1;
    Fd() = default;
    explicit Fd(int f) : fd(f) {}
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    Fd(Fd&& o) noexcept : fd(std::exchange(o.fd, -1)) {}
    Fd& operator=(Fd&& o) noexcept {
        reset();
        fd = std::exchange(o.fd, -1);
        return *this;
    }
    ~Fd() { reset(); }
    void reset() {
        if (fd >= 0) ::close(fd);
        fd = -1;
    }
};

bool add_path_rule(int ruleset, const char* path, std::uint64_t access) {
    Fd target(::open(path, O_PATH | O_CLOEXEC));
    if (target.fd < 0) return false;
    PathBeneathAttr attr{access, target.fd};
    return ::syscall(SYS_landlock_add_rule, ruleset, kRulePathBeneath, &attr, 0) == 0;
}

/// Ruleset allowing writes only beneath `scratch` (and to /dev/null), with TCP
/// denied when requested. Returns an invalid Fd when Landlock is unavailable.
Fd make_ruleset(const fs::path& scratch, bool restrict_fs, bool deny_network) {
    const int abi = landlock_abi_version();
    if (abi <= 0 || (!restrict_fs && !(deny_network && abi >= 4))) return {};

    std::uint64_t fs_access = 0;
    if (restrict_fs) {
        fs_access = kFsWriteFile | kFsRemoveDir | kFsRemoveFile | kFsMakeChar | kFsMakeDir | kFsMakeReg |
                    kFsMakeSock | kFsMakeFifo | kFsMakeBlock | kFsMakeSym;
        if (abi >= 2) fs_access |= kFsRefer;
        if (abi >= 3) fs_access |= kFsTruncate;
    }
    RulesetAttr attr{fs_access, 0, 0};
    std::size_t attr_size = sizeof(std::uint64_t);
    if (abi >= 4) {
        if (deny_network) attr.handled_access_net = kNetBindTcp | kNetConnectTcp;
        attr_size = 2 * sizeof(std::uint64_t);
    }
    if (abi >= 6) {
        attr.scoped = kScopeAbstractUnix | kScopeSignal;
        attr_size = sizeof(RulesetAttr);
    }
    Fd ruleset(static_cast<int>(::syscall(SYS_landlock_create_ruleset, &attr, attr_size, 0)));
    if (ruleset.fd < 0) return {};
    if (restrict_fs) {
        if (!add_path_rule(ruleset.fd, scratch.c_str(), fs_access)) return {};
        add_path_rule(ruleset.fd, "/dev/null", kFsWriteFile | (abi >= 3 ? kFsTruncate : 0));
    }
    return ruleset;
}

std::string resolve_executable(const std::string& name) {
    if (name.empty()) return {};
    if (name.find('/') != std::string::npos) return ::access(name.c_str(), X_OK) == 0 ? name : std::string();
    const char* path = std::getenv("PATH");
    for (const auto& dir : split(path ? path : "/usr/local/bin:/usr/bin:/bin", ':')) {
        if (dir.empty()) continue;
        auto candidate = dir + "/" + name;
        if (::access(candidate.c_str(), X_OK) == 0) return candidate;
    }
    return {};
}

struct ScratchDir {
    fs::path path;
    explicit ScratchDir(const fs::path& root) {
        std::string tmpl = (root / "mmagent-sbx-XXXXXX").string();
        if (::mkdtemp(tmpl.data()) == nullptr)
            throw SandboxUnavailable("cannot create scratch directory under " + root.string() + ": " +
                                     std::strerror(errno));
        path = tmpl;
    }
    ~ScratchDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

void set_limit(int resource, rlim_t value) {
    rlimit lim{value, value};
    ::setrlimit(resource, &lim);
}

}  // namespace

int landlock_abi_version() {
    static const int version = [] {
        const long v = ::syscall(SYS_landlock_create_ruleset, nullptr, 0, LANDLOCK_CREATE_RULESET_VERSION);
        return v < 0 ? 0 : static_cast<int>(v);
    }();
    return version;
}

// ---------------------------------------------------------------------------
// Runner

SandboxRunner::SandboxRunner(SandboxConfig config)
    : config_(std::move(config)), slots_(std::clamp(config_.max_concurrent, 1, 256)) {
    if (!config_.runner_command.empty()) runner_path_ = resolve_executable(config_.runner_command.front());
}

ExecutionResult SandboxRunner::execute(std::string_view snippet, const ExecutionLimits& limits) {
    if (trim(snippet).empty()) throw std::invalid_argument("snippet is empty");
    if (config_.runner_command.empty()) throw SandboxUnavailable("no sandbox runner is configured");
    if (runner_path_.empty())
        throw SandboxUnavailable("sandbox runner '" + config_.runner_command.front() + "' was not found");

    slots_.acquire();
    struct Release {
        std::counting_semaphore<256>& s;
        ~Release() { s.release(); }
    } release{slots_};

    ScratchDir scratch(config_.scratch_root);
    const fs::path snippet_path = scratch.path / config_.snippet_filename;
    {
        std::ofstream out(snippet_path, std::ios::binary);
        out << snippet;
        if (!out) throw SandboxUnavailable("cannot write snippet to " + snippet_path.string());
    }

    const double timeout_s = std::chrono::duration<double>(limits.wall_timeout).count();
    std::vector<std::string> args = config_.runner_command;
    args.push_back(snippet_path.string());
    args.push_back(std::to_string(timeout_s));
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);

    std::vector<std::string> env_strings{
        "HOME=" + scratch.path.string(), "TMPDIR=" + scratch.path.string(), "LANG=C.UTF-8",
        "PYTHONDONTWRITEBYTECODE=1",     "PYTHONIOENCODING=utf-8",
    };
    if (const char* path = std::getenv("PATH")) env_strings.push_back(std::string("PATH=") + path);
    std::vector<char*> envp;
    for (auto& e : env_strings) envp.push_back(e.data());
    envp.push_back(nullptr);

    Fd ruleset = make_ruleset(scratch.path, config_.restrict_filesystem, config_.deny_network);

    int out_pipe[2], err_pipe[2], exec_pipe[2];
    if (::pipe2(out_pipe, O_CLOEXEC) != 0 || ::pipe2(err_pipe, O_CLOEXEC) != 0 || ::pipe2(exec_pipe, O_CLOEXEC) != 0)
        throw SandboxUnavailable(std::string("pipe failed: ") + std::strerror(errno));
    Fd out_r(out_pipe[0]), out_w(out_pipe[1]), err_r(err_pipe[0]), err_w(err_pipe[1]), exec_r(exec_pipe[0]),
        exec_w(exec_pipe[1]);

    const rlim_t cpu_seconds = static_cast<rlim_t>(std::ceil(timeout_s)) + 1;
    const char* workdir = scratch.path.c_str();
    const auto started = std::chrono::steady_clock::now();
    const pid_t pid = ::fork();
    if (pid < 0) throw SandboxUnavailable(std::string("fork failed: ") + std::strerror(errno));
    if (pid == 0) {
        // Child: async-signal-safe calls only.
        ::setpgid(0, 0);
        const int devnull = ::open("/dev/null", O_RDONLY);
        if (devnull >= 0) ::dup2(devnull, 0);
        ::dup2(out_w.fd, 1);
        ::dup2(err_w.fd, 2);
        int err = 0;
        if (::chdir(workdir) != 0) err = errno;
        set_limit(RLIMIT_CPU, cpu_seconds);
        set_limit(RLIMIT_CORE, 0);
        if (config_.memory_limit_bytes > 0) set_limit(RLIMIT_AS, config_.memory_limit_bytes);
        if (err == 0 && ruleset.fd >= 0) {
            if (::prctl(PR_SET_NO_NEW_PRIVS, 1, 0, 0, 0) != 0 ||
                ::syscall(SYS_landlock_restrict_self, ruleset.fd, 0) != 0)
                err = errno;
        }
        if (err == 0) {
            ::execve(runner_path_.c_str(), argv.data(), envp.data());
            err = errno;
        }
        [[maybe_unused]] auto n = ::write(exec_w.fd, &err, sizeof err);
        ::_exit(127);
    }
    ::setpgid(pid, pid);
    out_w.reset();
    err_w.reset();
    exec_w.reset();
    ruleset.reset();

    auto reap = [pid] {
        int status = 0;
        while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
        }
        return status;
    };

    int exec_errno = 0;
    if (::read(exec_r.fd, &exec_errno, sizeof exec_errno) == static_cast<ssize_t>(sizeof exec_errno)) {
        reap();
        throw SandboxUnavailable("cannot start sandbox runner: " + std::string(std::strerror(exec_errno)));
    }

    // Runner output is JSON-escaped snippet output, so allow generous headroom
    // over the cap before treating it as runaway.
    const std::size_t raw_limit = std::max<std::size_t>(16u << 20, limits.output_cap * 8);
    std::string raw_out, raw_err;
    bool killed = false;
    bool overflow = false;
    const auto deadline = started + limits.wall_timeout;
    std::array<pollfd, 2> fds{pollfd{out_r.fd, POLLIN, 0}, pollfd{err_r.fd, POLLIN, 0}};
    std::array<std::string*, 2> sinks{&raw_out, &raw_err};
    auto grace_deadline = std::chrono::steady_clock::time_point::max();
    char buf[65536];
    while (fds[0].fd >= 0 || fds[1].fd >= 0) {
        const auto now = std::chrono::steady_clock::now();
        if (!killed && now >= deadline) {
            ::kill(-pid, SIGKILL);
            killed = true;
            grace_deadline = now + std::chrono::seconds(1);
        }
        if (killed && now >= grace_deadline) break;
        const auto until = killed ? grace_deadline : deadline;
        const auto wait_ms = std::chrono::duration_cast<std::chrono::milliseconds>(until - now).count();
        const int rc = ::poll(fds.data(), fds.size(), static_cast<int>(std::clamp<long long>(wait_ms + 1, 1, 1000)));
        if (rc < 0 && errno != EINTR) break;
        for (std::size_t i = 0; i < fds.size(); ++i) {
            if (fds[i].fd < 0 || !(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            const ssize_t n = ::read(fds[i].fd, buf, sizeof buf);
            if (n <= 0) {
                fds[i].fd = -1;
                continue;
            }
            sinks[i]->append(buf, static_cast<std::size_t>(n));
            if (sinks[i]->size() > raw_limit && !killed) {
                ::kill(-pid, SIGKILL);
                killed = overflow = true;
                grace_deadline = std::chrono::steady_clock::now() + std::chrono::seconds(1);
            }
        }
    }
    if (!killed) ::kill(-pid, SIGKILL);  // stray grandchildren holding nothing open
    const int status = reap();

    ExecutionResult result;
    result.duration = std::chrono::steady_clock::now() - started;
    if (killed) {
        result.killed_by_timeout = !overflow;
        result.exit_status = 128 + SIGKILL;
        char secs[32];
        std::snprintf(secs, sizeof secs, "%g", timeout_s);
        result.stderr_text = overflow ? "execution produced more output than allowed and was stopped"
                                      : std::string("execution timed out after ") + secs + " s";
        return result;
    }

    auto report = parse_runner_report(raw_out);
    if (!report) {
        std::string why = WIFSIGNALED(status) ? "killed by signal " + std::to_string(WTERMSIG(status))
                                              : "exit status " + std::to_string(WEXITSTATUS(status));
        throw SandboxUnavailable("sandbox runner produced no report (" + why + "): " +
                                 std::string(trim(raw_err)).substr(0, 500));
    }
    result.ok = report->ok;
    result.exit_status = report->ok ? 0 : 1;
    result.stdout_text = cap_output(std::move(report->stdout_text), limits.output_cap);
    result.stderr_text = cap_output(std::move(report->stderr_text), limits.output_cap);
    return result;
}

}  // namespace mmagent
