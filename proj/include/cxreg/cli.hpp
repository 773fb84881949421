// cli.hpp - command line front end.
//
// Every command is described by a JobConfig, which is written next to the outputs as
// job.json and can be replayed with `cxreg run --job job.json`.
// Exit codes: 0 success, 2 input error, 3 numerical failure. Errors are reported on
// the diagnostic stream as "cxreg:error:<kind>: <message>".

#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "cxreg/io.hpp"
#include "cxreg/mask_qc.hpp"
#include "cxreg/registration.hpp"

namespace cxreg {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 2;
inline constexpr int kExitNumericalFailure = 3;

// Environment variable naming the default output directory.
inline constexpr const char *kOutDirEnv = "CXREG_OUT_DIR";

struct JobConfig {
    std::string command;                       // register, diff, metrics, qc, stats, phantom
    std::map<std::string, std::string> paths;  // named input files
    std::vector<std::string> inputs;           // list inputs (qc masks, stats models)
    std::string output_dir = ".";
    RegistrationConfig registration;
    QcThresholds qc;
    double margin = 20.0;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    int jobs = 1;
    std::map<std::string, std::string> options;  // command specific settings

    friend bool operator==(const JobConfig &, const JobConfig &) = default;
};

json to_json(const JobConfig &job);
JobConfig job_config_from_json(const json &j);
std::string job_config_to_text(const JobConfig &job);
JobConfig job_config_from_text(const std::string &text);

// Runs a job; returns the exit code. Errors propagate as exceptions.
int execute_job(const JobConfig &job, std::ostream &out);

// Parses arguments (without the program name), runs the command and maps errors to
// exit codes.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace cxreg
