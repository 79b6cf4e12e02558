import geolocation from '@system.geolocation'
export default {
  onShow() {
    geolocation.getLocation({ success: (d) => { this.lat = d.latitude } })
  },
}
