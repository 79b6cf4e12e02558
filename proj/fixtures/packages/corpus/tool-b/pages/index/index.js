Page({
  pick() {
    wx['chooseImage']({ count: 1 });
    wx.request({ url: 'https://example.com/api' });
  },
});
