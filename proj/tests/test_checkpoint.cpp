#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "liteseg/checkpoint.hpp"

using namespace liteseg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("liteseg_ckpt_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

using Kind = CheckpointError::Kind;

Kind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const CheckpointError& e) {
        return e.kind();
    }
    FAIL("expected a CheckpointError");
    return Kind::NotACheckpoint;
}

}  // namespace

TEST_CASE("checkpoint: save then load reproduces every tensor bit-exactly") {
    TempDir dir;
    PPLiteSeg model(ModelConfig::preset("tiny"), 5);
    const std::string path = dir.file("tiny.ppls");
    save_checkpoint(model, path);

    PPLiteSeg loaded = load_checkpoint(path);
    CHECK(loaded.config() == model.config());
    auto a = model.named_parameters();
    auto b = loaded.named_parameters();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].name == b[i].name);
        CHECK(a[i].tensor.vec() == b[i].tensor.vec());
    }

    // a fresh model with a different seed converges to the stored weights
    PPLiteSeg other(ModelConfig::preset("tiny"), 999);
    load_checkpoint_into(other, path);
    auto c = other.named_parameters();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].tensor.vec() == c[i].tensor.vec());
}

TEST_CASE("checkpoint: wrong magic is 'not a checkpoint'") {
    TempDir dir;
    const std::string path = dir.file("bogus.ppls");
    std::ofstream(path, std::ios::binary) << "JUNKJUNKJUNKJUNK";
    CHECK(kind_of([&] { read_named_tensors(path); }) == Kind::NotACheckpoint);
}

TEST_CASE("checkpoint: truncated files are reported as truncated") {
    TempDir dir;
    PPLiteSeg model(ModelConfig::preset("tiny"), 6);
    const std::string path = dir.file("full.ppls");
    save_checkpoint(model, path);
    auto size = fs::file_size(path);
    fs::resize_file(path, size / 2);
    CHECK(kind_of([&] { read_named_tensors(path); }) == Kind::Truncated);
}

TEST_CASE("checkpoint: version mismatch is rejected") {
    TempDir dir;
    PPLiteSeg model(ModelConfig::preset("tiny"), 7);
    const std::string path = dir.file("ver.ppls");
    save_checkpoint(model, path);
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(4);
    const char bad[4] = {99, 0, 0, 0};
    f.write(bad, 4);
    f.close();
    CHECK(kind_of([&] { read_named_tensors(path); }) == Kind::VersionMismatch);
}

TEST_CASE("checkpoint: unknown, missing, and reshaped tensors raise distinct kinds") {
    TempDir dir;
    PPLiteSeg model(ModelConfig::preset("tiny"), 8);
    auto params = model.named_parameters();

    SUBCASE("unknown tensor") {
        auto extra = params;
        extra.push_back({"not.a.real.tensor", Tensor::zeros({3}), true, false});
        const std::string path = dir.file("extra.ppls");
        write_named_tensors(path, model.config().to_json(), extra);
        CHECK(kind_of([&] { load_checkpoint_into(model, path); }) == Kind::UnknownTensor);
    }
    SUBCASE("missing tensor") {
        auto subset = params;
        subset.pop_back();
        const std::string path = dir.file("subset.ppls");
        write_named_tensors(path, model.config().to_json(), subset);
        CHECK(kind_of([&] { load_checkpoint_into(model, path); }) == Kind::MissingTensor);
    }
    SUBCASE("shape mismatch") {
        auto reshaped = params;
        reshaped[0].tensor = Tensor::zeros({1, 2, 3});
        const std::string path = dir.file("reshaped.ppls");
        write_named_tensors(path, model.config().to_json(), reshaped);
        CHECK(kind_of([&] { load_checkpoint_into(model, path); }) == Kind::ShapeMismatch);
    }
}

TEST_CASE("checkpoint: a different model config refuses to load") {
    TempDir dir;
    ModelConfig narrow = ModelConfig::preset("tiny");
    ModelConfig wide = ModelConfig::preset("tiny");
    wide.decoder_channels = {16, 48, 64};
    PPLiteSeg a(narrow, 9);
    PPLiteSeg b(wide, 9);
    const std::string path = dir.file("narrow.ppls");
    save_checkpoint(a, path);
    CHECK(kind_of([&] { load_checkpoint_into(b, path); }) == Kind::ConfigMismatch);
}

TEST_CASE("checkpoint: container round-trips arbitrary named tensors") {
    TempDir dir;
    std::vector<ParamRef> tensors;
    tensors.push_back({"alpha", Tensor::from_vector({2, 2}, {1.5f, -2.25f, 0.0f, 1e-30f}), true, false});
    tensors.push_back({"beta.velocity", Tensor::from_vector({3}, {0.1f, 0.2f, 0.3f}), false, false});
    const std::string path = dir.file("generic.ppls");
    write_named_tensors(path, "{}", tensors);
    NamedTensorFile file = read_named_tensors(path);
    REQUIRE(file.tensors.size() == 2);
    CHECK(file.tensors[0].first == "alpha");
    CHECK(file.tensors[0].second.vec() == tensors[0].tensor.vec());
    CHECK(file.tensors[1].first == "beta.velocity");
    CHECK(file.tensors[1].second.vec() == tensors[1].tensor.vec());
}
