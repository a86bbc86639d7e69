// sbash-fstool: capture a filesystem template from a machine, or rebuild a
// template on disk for a reference shell to run in.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "sbash/errors.hpp"
#include "sbash/fs_snapshot.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw sbash::UnreadableFile("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Filesystem template tool"};
  app.require_subcommand(1);

  sbash::SnapshotOptions snap;
  std::string source = "/", output = "-";
  auto* snapshot = app.add_subcommand("snapshot", "Capture a directory tree as a template");
  snapshot->add_option("--source", source, "Directory mapped to /")->capture_default_str();
  snapshot->add_option("-o,--output", output, "Output file, - for stdout")->capture_default_str();
  snapshot->add_option("--deep", snap.deep, "Prefixes recursed fully")->capture_default_str();
  snapshot->add_option("--content", snap.content, "Prefixes whose text files keep content")
      ->capture_default_str();
  snapshot->add_option("--exclude", snap.exclude, "Prefixes dropped from the template");
  snapshot->add_option("--empty", snap.empty, "Directories recorded without children")
      ->capture_default_str();
  snapshot->add_option("--max-content", snap.max_content_bytes, "Largest file kept with content")
      ->capture_default_str();

  sbash::MaterializeOptions mat;
  std::string template_path, dest;
  bool no_owners = false;
  auto* materialize = app.add_subcommand("materialize", "Write a template to disk");
  materialize->add_option("template", template_path)->required();
  materialize->add_option("dest", dest)->required();
  materialize->add_option("--skip-contents", mat.skip_contents,
                          "Directories created empty");
  materialize->add_flag("--no-owners", no_owners, "Keep files owned by the caller");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*snapshot) {
      const auto text = sbash::format_template_records(sbash::snapshot_tree(source, snap));
      if (output == "-") {
        std::cout << text;
      } else {
        std::ofstream out(output, std::ios::binary);
        out << text;
        if (!out) throw sbash::Error("cannot write " + output);
      }
    } else {
      mat.apply_owners = !no_owners;
      const auto records = sbash::parse_template_records(slurp(template_path));
      sbash::materialize_tree(records, dest, mat);
    }
  } catch (const sbash::Error& e) {
    std::cerr << "sbash-fstool: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
