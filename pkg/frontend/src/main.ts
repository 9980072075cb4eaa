import { initApp } from "./app.js";

const root = document.getElementById("app");
if (root) {
  const app = initApp(root);
  void app.refresh();
}
