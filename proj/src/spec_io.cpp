#include "spec_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace binf {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw Error(Error::kParse, "channel spec: " + msg); }

const json& need(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) fail(std::string("missing field '") + key + "'");
  return *it;
}

int need_alphabet(const json& alphabets, const char* key) {
  auto it = alphabets.find(key);
  if (it == alphabets.end()) fail(std::string("missing alphabet '") + key + "'");
  if (!it->is_number_integer() || it->get<int>() < 1)
    fail(std::string("alphabet '") + key + "' must be a positive integer");
  return it->get<int>();
}

// Flattens a nested array with the given dimensions, checking shape as it
// goes. `where` names the array for error messages.
template <typename T>
void flatten(const json& node, std::span<const int> dims, std::vector<T>& out, std::string where) {
  if (dims.empty()) {
    if constexpr (std::is_same_v<T, double>) {
      if (!node.is_number()) fail(where + ": expected a number");
    } else {
      if (!node.is_number_integer()) fail(where + ": expected an integer");
    }
    out.push_back(node.get<T>());
    return;
  }
  if (!node.is_array() || static_cast<int>(node.size()) != dims[0])
    fail(where + ": expected an array of length " + std::to_string(dims[0]));
  for (int i = 0; i < dims[0]; ++i)
    flatten(node[static_cast<std::size_t>(i)], dims.subspan(1), out, where + "[" + std::to_string(i) + "]");
}

// Builds the channel conditional row by row so a bad row is reported with its
// conditioning indices.
ConditionalPmf build_channel(const json& node, const std::vector<Alphabet>& given, const Alphabet& target) {
  std::vector<int> dims;
  for (const auto& a : given) dims.push_back(a.size);
  dims.push_back(target.size);
  std::vector<double> flat;
  flatten(node, dims, flat, "channel");

  std::size_t rows = flat.size() / static_cast<std::size_t>(target.size);
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0;
    bool ok = true;
    for (int v = 0; v < target.size; ++v) {
      double w = flat[r * static_cast<std::size_t>(target.size) + static_cast<std::size_t>(v)];
      if (!(w >= 0)) ok = false;
      total += w;
    }
    if (!ok || std::abs(total - 1.0) > kMassTol) {
      // Decode the row index back into conditioning symbols for the message.
      std::string at;
      std::size_t rem = r;
      for (std::size_t k = given.size(); k-- > 0;) {
        int sym = static_cast<int>(rem % static_cast<std::size_t>(given[k].size));
        rem /= static_cast<std::size_t>(given[k].size);
        at = "[" + given[k].name + "=" + std::to_string(sym) + "]" + at;
      }
      fail("channel row " + at + (ok ? " sums to " + std::to_string(total) : " has a negative weight"));
    }
  }
  return ConditionalPmf(given, target, std::move(flat));
}

DetLink build_link(const json& node, const char* name, std::vector<int> dims, int out_size) {
  DetLink link;
  link.given_sizes = dims;
  link.out_size = out_size;
  flatten(node, dims, link.table, std::string("det_links.") + name);
  link.validate(std::string("det_links.") + name);
  return link;
}

json nest(std::span<const double> flat, std::span<const int> dims, std::size_t& pos) {
  if (dims.empty()) return flat[pos++];
  json arr = json::array();
  for (int i = 0; i < dims[0]; ++i) arr.push_back(nest(flat, dims.subspan(1), pos));
  return arr;
}

json nest_int(std::span<const int> flat, std::span<const int> dims, std::size_t& pos) {
  if (dims.empty()) return flat[pos++];
  json arr = json::array();
  for (int i = 0; i < dims[0]; ++i) arr.push_back(nest_int(flat, dims.subspan(1), pos));
  return arr;
}

json nested(std::span<const double> flat, std::span<const int> dims) {
  std::size_t pos = 0;
  return nest(flat, dims, pos);
}

json nested_int(std::span<const int> flat, std::span<const int> dims) {
  std::size_t pos = 0;
  return nest_int(flat, dims, pos);
}

}  // namespace

ChannelSpec parse_spec(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail("top level must be an object");
  const json& schema = need(doc, "schema");
  if (!schema.is_number_integer() || schema.get<int>() != 1) fail("unsupported schema version, expected 1");

  const json& kind_node = need(doc, "kind");
  if (!kind_node.is_string()) fail("'kind' must be a string");
  auto kind = kind_from_name(kind_node.get<std::string>());
  if (!kind) fail("unknown kind '" + kind_node.get<std::string>() + "'");

  const json& alphabets = need(doc, "alphabets");
  if (!alphabets.is_object()) fail("'alphabets' must be an object");

  ChannelSpec spec;
  spec.kind = *kind;
  const json& det = need(doc, "det_links");

  if (is_relay_kind(spec.kind)) {
    int nx = need_alphabet(alphabets, "x");
    int nxr = need_alphabet(alphabets, "xr");
    int ny = need_alphabet(alphabets, "y");
    int nz = need_alphabet(alphabets, "z");
    spec.inputs = {Alphabet{"x", nx}};
    spec.relay_input = Alphabet{"xr", nxr};
    spec.output = Alphabet{"y", ny};
    spec.cribs = {Alphabet{"z", nz}};

    if (spec.kind == ChannelKind::kRelay) {
      if (doc.contains("state_pmf")) fail("kind 'relay' takes no state_pmf");
      spec.states = {Alphabet{"s", 1}};
      spec.state_pmf = Pmf(spec.states[0], {1.0});
      // Validate in the file's [x][xr][y] layout, then prepend the size-1
      // state axis; the flat data is identical.
      ConditionalPmf flat_chan =
          build_channel(need(doc, "channel"), {spec.inputs[0], spec.relay_input}, spec.output);
      spec.channel = ConditionalPmf({spec.states[0], spec.inputs[0], spec.relay_input}, spec.output,
                                    std::vector<double>(flat_chan.raw().begin(), flat_chan.raw().end()));
      std::vector<int> ztab;
      flatten(need(det, "z"), std::array<int, 2>{nx, nxr}, ztab, "det_links.z");
      DetLink link;
      link.given_sizes = {1, nx, nxr};
      link.out_size = nz;
      link.table = std::move(ztab);
      link.validate("det_links.z");
      spec.links = {link};
    } else {
      int ns = need_alphabet(alphabets, "s");
      spec.states = {Alphabet{"s", ns}};
      std::vector<double> sp;
      flatten(need(doc, "state_pmf"), std::array<int, 1>{ns}, sp, "state_pmf");
      try {
        spec.state_pmf = Pmf(spec.states[0], std::move(sp));
      } catch (const Error& e) {
        fail(std::string("state_pmf: ") + e.what());
      }
      spec.channel = build_channel(need(doc, "channel"), {spec.states[0], spec.inputs[0], spec.relay_input},
                                   spec.output);
      if (spec.kind == ChannelKind::kStateRelayNoDelay) {
        const json& znode = need(det, "z");
        // Accept the two-argument form, or a three-argument table constant in xr.
        bool three_arg = znode.is_array() && !znode.empty() && znode[0].is_array() && !znode[0].empty() &&
                         znode[0][0].is_array();
        std::vector<int> ztab;
        if (three_arg) {
          std::vector<int> full;
          flatten(znode, std::array<int, 3>{ns, nx, nxr}, full, "det_links.z");
          for (int s = 0; s < ns; ++s)
            for (int x = 0; x < nx; ++x) {
              std::size_t base = (static_cast<std::size_t>(s) * nx + x) * nxr;
              for (int xr = 1; xr < nxr; ++xr)
                if (full[base + static_cast<std::size_t>(xr)] != full[base])
                  fail("det_links.z: no-delay kind requires z to be constant in xr, differs at [s=" +
                       std::to_string(s) + "][x=" + std::to_string(x) + "]");
              ztab.push_back(full[base]);
            }
        } else {
          flatten(znode, std::array<int, 2>{ns, nx}, ztab, "det_links.z");
        }
        DetLink link;
        link.given_sizes = {ns, nx};
        link.out_size = nz;
        link.table = std::move(ztab);
        link.validate("det_links.z");
        spec.links = {link};
      } else {
        spec.links = {build_link(need(det, "z"), "z", {ns, nx, nxr}, nz)};
      }
    }
  } else {
    int ns1 = need_alphabet(alphabets, "s1");
    int ns2 = need_alphabet(alphabets, "s2");
    int nx1 = need_alphabet(alphabets, "x1");
    int nx2 = need_alphabet(alphabets, "x2");
    int ny = need_alphabet(alphabets, "y");
    int nz1 = need_alphabet(alphabets, "z1");
    int nz2 = need_alphabet(alphabets, "z2");
    spec.states = {Alphabet{"s1", ns1}, Alphabet{"s2", ns2}};
    spec.inputs = {Alphabet{"x1", nx1}, Alphabet{"x2", nx2}};
    spec.output = Alphabet{"y", ny};
    spec.cribs = {Alphabet{"z1", nz1}, Alphabet{"z2", nz2}};

    std::vector<double> sp;
    flatten(need(doc, "state_pmf"), std::array<int, 2>{ns1, ns2}, sp, "state_pmf");
    try {
      spec.state_pmf = Pmf(Alphabet{"s1s2", ns1 * ns2}, std::move(sp));
    } catch (const Error& e) {
      fail(std::string("state_pmf: ") + e.what());
    }
    spec.channel = build_channel(need(doc, "channel"),
                                 {spec.states[0], spec.states[1], spec.inputs[0], spec.inputs[1]}, spec.output);
    spec.links = {build_link(need(det, "z1"), "z1", {ns1, nx1}, nz1),
                  build_link(need(det, "z2"), "z2", {ns2, nx2}, nz2)};
  }

  try {
    spec.validate();
  } catch (const Error& e) {
    fail(e.what());
  }
  return spec;
}

ChannelSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Error::kIo, "cannot open spec file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_spec(buf.str());
}

std::string serialize_spec(const ChannelSpec& spec) {
  json doc;
  doc["schema"] = 1;
  doc["kind"] = kind_name(spec.kind);
  json alpha = json::object();
  json det = json::object();

  if (is_relay_kind(spec.kind)) {
    int ns = spec.states[0].size, nx = spec.inputs[0].size, nxr = spec.relay_input.size;
    int ny = spec.output.size, nz = spec.cribs[0].size;
    alpha["x"] = nx;
    alpha["xr"] = nxr;
    alpha["y"] = ny;
    alpha["z"] = nz;
    if (spec.kind != ChannelKind::kRelay) {
      alpha["s"] = ns;
      doc["state_pmf"] = nested(spec.state_pmf.weights(), std::array<int, 1>{ns});
      doc["channel"] = nested(spec.channel.raw(), std::array<int, 4>{ns, nx, nxr, ny});
    } else {
      doc["channel"] = nested(spec.channel.raw(), std::array<int, 3>{nx, nxr, ny});
    }
    if (spec.kind == ChannelKind::kStateRelayNoDelay)
      det["z"] = nested_int(spec.links[0].table, std::array<int, 2>{ns, nx});
    else if (spec.kind == ChannelKind::kRelay)
      det["z"] = nested_int(spec.links[0].table, std::array<int, 2>{nx, nxr});
    else
      det["z"] = nested_int(spec.links[0].table, std::array<int, 3>{ns, nx, nxr});
  } else {
    int ns1 = spec.states[0].size, ns2 = spec.states[1].size;
    int nx1 = spec.inputs[0].size, nx2 = spec.inputs[1].size;
    alpha["s1"] = ns1;
    alpha["s2"] = ns2;
    alpha["x1"] = nx1;
    alpha["x2"] = nx2;
    alpha["y"] = spec.output.size;
    alpha["z1"] = spec.cribs[0].size;
    alpha["z2"] = spec.cribs[1].size;
    doc["state_pmf"] = nested(spec.state_pmf.weights(), std::array<int, 2>{ns1, ns2});
    doc["channel"] =
        nested(spec.channel.raw(), std::array<int, 5>{ns1, ns2, nx1, nx2, spec.output.size});
    det["z1"] = nested_int(spec.links[0].table, std::array<int, 2>{ns1, nx1});
    det["z2"] = nested_int(spec.links[1].table, std::array<int, 2>{ns2, nx2});
  }
  doc["alphabets"] = alpha;
  doc["det_links"] = det;
  return doc.dump(2) + "\n";
}

void save_spec(const ChannelSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(Error::kIo, "cannot write spec file: " + path);
  out << serialize_spec(spec);
}

}  // namespace binf
