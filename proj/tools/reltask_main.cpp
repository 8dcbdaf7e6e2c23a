// reltask CLI: thin front end over the shared library's C API. Subcommand
// arguments assemble a JSON config (file + convenience flags + generic
// --key value overrides); all computation happens behind rt_run_command.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "reltask.h"

namespace {

using nlohmann::json;

json parse_override_value(const std::string& text) {
  // Accept JSON literals (numbers, booleans, arrays, objects) and fall back
  // to a plain string.
  try {
    return json::parse(text);
  } catch (const std::exception&) {
    return json(text);
  }
}

void set_path(json& config, const std::string& dotted, const json& value) {
  json* node = &config;
  std::stringstream ss(dotted);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i]) || !(*node)[parts[i]].is_object())
      (*node)[parts[i]] = json::object();
    node = &(*node)[parts[i]];
  }
  (*node)[parts.back()] = value;
}

int apply_extras(json& config, const std::vector<std::string>& extras) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    std::string key = extras[i];
    if (key.rfind("--", 0) != 0) {
      std::cerr << "reltask: stray argument '" << key << "'\n";
      return 2;
    }
    key = key.substr(2);
    std::string value = "true";
    const auto eq = key.find('=');
    if (eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else if (i + 1 < extras.size() && extras[i + 1].rfind("--", 0) != 0) {
      value = extras[++i];
    }
    set_path(config, key, parse_override_value(value));
  }
  return 0;
}

std::vector<json> csv_ints(const std::string& text) {
  std::vector<json> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(std::stoll(part));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reltask: template-task workbench"};
  app.require_subcommand(1);

  const std::vector<std::string> commands = {
      "gen", "train", "kernel", "nmatrix", "probe", "sweep", "figures",
      "selftest"};

  std::string config_path, builtin, out_dir, kernel_type, arch, demb_list;
  long long n = -1, seed = -1, jobs = -1, epochs = -1;
  double lr = -1.0, lambda = -1.0;
  bool attn_identity = false, value_identity = false, with_cls = false;

  std::vector<CLI::App*> subs;
  for (const auto& name : commands) {
    CLI::App* sub = app.add_subcommand(name);
    sub->allow_extras();
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--builtin", builtin, "builtin task name");
    sub->add_option("--n", n, "training set size");
    sub->add_option("--seed", seed, "run seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--jobs", jobs, "worker pool size");
    sub->add_option("--kernel", kernel_type, "kernel type (attn|trans|mlp)");
    sub->add_option("--arch", arch, "model architecture (transformer|mlp)");
    sub->add_option("--demb", demb_list, "comma-separated embedding widths");
    sub->add_option("--lr", lr, "learning rate");
    sub->add_option("--epochs", epochs, "training epochs");
    sub->add_option("--lambda", lambda, "ridge parameter");
    sub->add_flag("--attn-identity", attn_identity, "enable W_K^T W_Q + aI");
    sub->add_flag("--value-identity", value_identity, "enable W_V^T W_O + bI");
    sub->add_flag("--with-cls", with_cls, "append the CLS token");
    subs.push_back(sub);
  }

  CLI11_PARSE(app, argc, argv);

  std::string command;
  CLI::App* active = nullptr;
  for (std::size_t i = 0; i < commands.size(); ++i)
    if (subs[i]->parsed()) {
      command = commands[i];
      active = subs[i];
    }

  json config = json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "reltask: cannot read config " << config_path << "\n";
      return 2;
    }
    try {
      in >> config;
    } catch (const std::exception& e) {
      std::cerr << "reltask: bad config: " << e.what() << "\n";
      return 2;
    }
  }

  if (!builtin.empty()) set_path(config, "task.builtin", json(builtin));
  if (with_cls) set_path(config, "task.with_cls", json(true));
  if (n >= 0) config["n"] = n;
  if (seed >= 0) config["seed"] = seed;
  if (out_dir.size()) config["out_dir"] = out_dir;
  if (jobs >= 0) config["jobs"] = jobs;
  if (!kernel_type.empty()) set_path(config, "kernel.type", json(kernel_type));
  if (!arch.empty()) config["arch"] = arch;
  if (!demb_list.empty()) config["d_emb"] = csv_ints(demb_list);
  if (lr >= 0.0) set_path(config, "train.lr", json(lr));
  if (epochs >= 0) set_path(config, "train.epochs", json(epochs));
  if (lambda >= 0.0) config["lambda"] = lambda;
  if (attn_identity) set_path(config, "model.attn_identity", json(true));
  if (value_identity) {
    if (command == "probe")
      config["train_only_b"] = true;
    else
      set_path(config, "model.value_identity", json(true));
  }

  if (active) {
    const int rc = apply_extras(config, active->remaining());
    if (rc != 0) return rc;
  }

  char* report = nullptr;
  const rt_status status =
      rt_run_command(command.c_str(), config.dump().c_str(), &report);
  if (report) {
    std::cerr << report << "\n";
    rt_string_free(report);
  }
  if (status == RT_OK) return 0;
  std::cerr << "reltask " << command << ": " << rt_status_name(status) << ": "
            << rt_last_error() << "\n";
  return status == RT_ERR_PARTIAL ? 1 : 2;
}
