import { createApi } from "./api";
import { mount } from "./app";
import "./style.css";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

const app = mount(root, createApi());
const params = new URLSearchParams(window.location.search);
const existing = params.get("session");
if (existing) {
  void app.attach(existing);
} else {
  void app.start(undefined, Number(params.get("seed") ?? "1"));
}
